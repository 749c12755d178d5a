#pragma once

#include "pvw/alt_weights.hpp"
#include "pvw/bayes.hpp"
#include "pvw/normal.hpp"
#include "pvw/power.hpp"
#include "pvw/spjotvoll.hpp"
#include "pvw/study.hpp"
#include "pvw/types.hpp"
