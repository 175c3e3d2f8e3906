#pragma once

// Umbrella header for the full library: adapter-equipped ViT encoder,
// multi-level fusion, prompt-free mask decoder, detail enhancement, losses,
// saliency metrics, data pipeline, training, and the ablation matrix.

#include "ablation.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "decoder.hpp"
#include "dem.hpp"
#include "encoder.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "mlfm.hpp"
#include "model.hpp"
#include "optim.hpp"
#include "plot.hpp"
#include "report.hpp"
#include "train.hpp"
