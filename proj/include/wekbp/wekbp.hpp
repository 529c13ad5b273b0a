#pragma once

#include "wekbp/channel.hpp"
#include "wekbp/dataset.hpp"
#include "wekbp/geo.hpp"
#include "wekbp/metrics.hpp"
#include "wekbp/nn/beamnet.hpp"
#include "wekbp/nn/train.hpp"
#include "wekbp/pipeline.hpp"
#include "wekbp/scene.hpp"
#include "wekbp/taxonomy.hpp"
#include "wekbp/wek.hpp"
