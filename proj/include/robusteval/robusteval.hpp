#pragma once

#include "robusteval/align.hpp"
#include "robusteval/behavior.hpp"
#include "robusteval/corruption.hpp"
#include "robusteval/coverage.hpp"
#include "robusteval/dataset.hpp"
#include "robusteval/error.hpp"
#include "robusteval/imperceptibility.hpp"
#include "robusteval/numeric.hpp"
#include "robusteval/oracle.hpp"
#include "robusteval/pairs.hpp"
#include "robusteval/perturb.hpp"
#include "robusteval/profile.hpp"
#include "robusteval/records.hpp"
#include "robusteval/report.hpp"
#include "robusteval/structure.hpp"
#include "robusteval/tensor.hpp"
#include "robusteval/toynet.hpp"
#include "robusteval/trace.hpp"
