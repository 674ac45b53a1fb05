#pragma once

#include "sleepctl/errors.hpp"
#include "sleepctl/rng.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/arrivals.hpp"
#include "sleepctl/cost.hpp"
#include "sleepctl/hash.hpp"
#include "sleepctl/joint_mdp.hpp"
#include "sleepctl/policy_greedy.hpp"
#include "sleepctl/policy_index.hpp"
#include "sleepctl/policy_baselines.hpp"
#include "sleepctl/simulator.hpp"
#include "sleepctl/experiments/config.hpp"
#include "sleepctl/experiments/csv.hpp"
#include "sleepctl/experiments/experiment.hpp"
#include "sleepctl/experiments/report.hpp"
