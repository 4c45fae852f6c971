#pragma once

#include "texturefuse/bench.hpp"
#include "texturefuse/container.hpp"
#include "texturefuse/dataset.hpp"
#include "texturefuse/haptic.hpp"
#include "texturefuse/inference.hpp"
#include "texturefuse/layers.hpp"
#include "texturefuse/metrics.hpp"
#include "texturefuse/nets.hpp"
#include "texturefuse/network.hpp"
#include "texturefuse/optim.hpp"
#include "texturefuse/sliding.hpp"
#include "texturefuse/synthetic.hpp"
#include "texturefuse/tensor.hpp"
#include "texturefuse/training.hpp"
#include "texturefuse/visual.hpp"
