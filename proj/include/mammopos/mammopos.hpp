#pragma once

#include "mammopos/annotation.hpp"
#include "mammopos/augment.hpp"
#include "mammopos/bb_detect.hpp"
#include "mammopos/common.hpp"
#include "mammopos/decision.hpp"
#include "mammopos/eval.hpp"
#include "mammopos/geometry.hpp"
#include "mammopos/image.hpp"
#include "mammopos/image_io.hpp"
#include "mammopos/loss.hpp"
#include "mammopos/model.hpp"
#include "mammopos/phantom.hpp"
#include "mammopos/predictor.hpp"
#include "mammopos/report.hpp"
#include "mammopos/study.hpp"
#include "mammopos/train.hpp"
