#pragma once

#include "coopmod/calibration.hpp"
#include "coopmod/channel.hpp"
#include "coopmod/decision.hpp"
#include "coopmod/fusion.hpp"
#include "coopmod/geometry.hpp"
#include "coopmod/kpi.hpp"
#include "coopmod/messages.hpp"
#include "coopmod/moderator.hpp"
#include "coopmod/perception.hpp"
#include "coopmod/random.hpp"
#include "coopmod/scenario.hpp"
#include "coopmod/sim.hpp"
