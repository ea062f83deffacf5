#pragma once

// Umbrella header.

#include "qpi/common.hpp"
#include "qpi/data.hpp"
#include "qpi/eval.hpp"
#include "qpi/loss.hpp"
#include "qpi/net.hpp"
#include "qpi/oracle.hpp"
#include "qpi/serialize.hpp"
#include "qpi/train.hpp"
