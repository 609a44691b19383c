#pragma once

#include "hsad/error.hpp"
#include "hsad/trace.hpp"
#include "hsad/manifest.hpp"
#include "hsad/signal.hpp"
#include "hsad/fft.hpp"
#include "hsad/spectral.hpp"
#include "hsad/labeler.hpp"
#include "hsad/detector.hpp"
#include "hsad/eval.hpp"
#include "hsad/toy_transformer.hpp"
