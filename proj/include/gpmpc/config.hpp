#pragma once

#include <string>

#include "gpmpc/gp.hpp"
#include "gpmpc/ocp.hpp"
#include "gpmpc/pipeline.hpp"
#include "gpmpc/sim.hpp"

namespace gpmpc {

struct PipelineConfig {
  int n_rollouts = 200;    // closed-loop sampling rollouts feeding the pool
  int rollout_len = 50;    // control steps per rollout
  int n_test = 1500;       // held-out labeled points
  int budget = 1000;       // greedy selection budget
  int refit_every = 250;
  int fit_subsample = 320;
  int refit_restarts = 2;
  int refit_evals = 200;
  int final_restarts = 3;  // hyperparameter fit of the deployed models
  int final_evals = 400;
  int n_deploy = 1000;     // training points kept for deployment
};

// One document with sections vehicle, ocp, gp, pipeline, sim. The vehicle
// section fills ocp.vehicle (the solver and the plant share it).
struct Config {
  OcpParams ocp;
  GpHyperparams gp_initial;
  PipelineConfig pipeline;
  SimConfig sim;
};

// Table I defaults on the benchmark track.
Config default_config();

// Defaults overridden by the keys present in the JSON file. The sim track
// accepts "benchmark" | "straight" | "circle" or an inline object with
// breakpoints/kappas/closed.
Config load_config(const std::string& path);

void save_config(const Config& config, const std::string& path);

}  // namespace gpmpc
