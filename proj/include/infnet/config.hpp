#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "infnet/eval.hpp"
#include "infnet/model.hpp"
#include "infnet/sampler.hpp"
#include "infnet/synth.hpp"

namespace infnet {

// Flat dotted-key run configuration ("model.hidden = 64", '#' comments).
// Unknown keys are rejected; command-line overrides use the same key syntax.
struct RunConfig {
    std::uint64_t seed = 42;
    bool f64 = true;
    int threads = 0;
    std::string out_dir = "out";

    // input/artifact paths; empty entries resolve to <out>/<default name>
    std::string path_diffusion, path_browse, path_purchase, path_catalog;
    std::string path_network, path_queries, path_checkpoint;

    std::int64_t grid_start = 2419200;
    std::int64_t grid_step_seconds = 604800;
    std::size_t grid_steps = 8;

    FeatureConfig features;
    SynthConfig synth;
    ModelConfig model;

    double train_fraction = 0.7;
    TrainOptions train;
    LrOptions baseline;

    std::int64_t analytics_horizon = 0;  // 0 selects one grid step
    bool analytics_csv = true;

    static RunConfig from_file(const std::string& path);
    static RunConfig defaults() { return RunConfig(); }

    // applies "key=value"; throws on unknown key or bad value
    void set(const std::string& key, const std::string& value);

    // fill path defaults from out_dir and push shared knobs (seed, grid) into
    // the component configs
    void finalize();

    std::string diffusion_path() const { return path_diffusion; }

    TimeGrid grid() const { return build_time_grid(grid_start, grid_step_seconds, grid_steps); }
};

}  // namespace infnet
