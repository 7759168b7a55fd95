#pragma once

// Umbrella header.

#include "otssl/errors.hpp"
#include "otssl/exp/experiment.hpp"
#include "otssl/exp/report.hpp"
#include "otssl/exp/stats.hpp"
#include "otssl/gnss/dataset.hpp"
#include "otssl/gnss/grid.hpp"
#include "otssl/gnss/signal.hpp"
#include "otssl/io.hpp"
#include "otssl/nn/adam.hpp"
#include "otssl/nn/layers.hpp"
#include "otssl/nn/model.hpp"
#include "otssl/ot/cost.hpp"
#include "otssl/ot/distance.hpp"
#include "otssl/ot/histogram.hpp"
#include "otssl/ot/transport.hpp"
#include "otssl/rng.hpp"
#include "otssl/ssl/train.hpp"
#include "otssl/tensor.hpp"
