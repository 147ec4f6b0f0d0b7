#pragma once

// Core library: Eigen and nlohmann/json only. Segmentation I/O and the HTTP
// service (OpenCV, cpp-httplib) are included separately.
#include "klp/core.hpp"
#include "klp/dataset.hpp"
#include "klp/experiment.hpp"
#include "klp/graphs.hpp"
#include "klp/inductive.hpp"
#include "klp/kernel_lp.hpp"
#include "klp/kernels.hpp"
#include "klp/labels.hpp"
#include "klp/linalg.hpp"
#include "klp/model_io.hpp"
#include "klp/pnlp.hpp"
#include "klp/segmentation.hpp"
#include "klp/soft_labels.hpp"
