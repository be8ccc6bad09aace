#pragma once

#include "fracsim/agent.hpp"
#include "fracsim/experiment.hpp"
#include "fracsim/fraction.hpp"
#include "fracsim/logs.hpp"
#include "fracsim/rng.hpp"
#include "fracsim/sequences.hpp"
#include "fracsim/skills.hpp"
#include "fracsim/tuning.hpp"
#include "fracsim/tutor.hpp"
