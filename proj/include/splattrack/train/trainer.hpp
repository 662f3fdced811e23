// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splattrack/data/dataset.hpp"
#include "splattrack/field/deform.hpp"
#include "splattrack/train/adam.hpp"
#include "splattrack/train/config.hpp"
#include "splattrack/train/render_pipeline.hpp"

#include <chrono>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace splattrack::train {

/// Canonical Gaussians plus the deformation field. `fine` is false while the
/// field has not been trained yet; rendering such a model bypasses the field.
struct Model {
    GaussianSet gaussians;
    field::DeformationField field;
    bool fine = false;
};

/// Random point cloud inside the scene bbox: isotropic scales from the mean
/// distance to the three nearest neighbours, identity rotations, gray colour.
/// The field bbox is the cloud's bbox grown by 10% per side.
Model initialize_model(const data::SceneDataset &dataset, const TrainConfig &config);

/// flag_i = sigmoid(mask_logit_i) > threshold.
std::vector<std::uint8_t> select_dynamic(const GaussianSet &set, double threshold);

/// World-space state of a model at normalized time t (canonical state for a
/// model that has not entered the fine phase).
field::DeformedState model_state(const Model &model, double t, double dynamic_threshold = 0.5);

struct LossRecord {
    int iteration = 0;
    bool fine = false;
    int camera_id = 0;
    int time_index = 0;
    double photometric = 0.0;
    double mask = 0.0;
    double iso = 0.0;
    double momentum = 0.0;
    double total = 0.0;
    std::size_t gaussians = 0;
    std::size_t dynamic = 0;
    double wall_time = 0.0;

    /// One JSON object on a single line.
    std::string to_json() const;
};

/// Gradients of one iteration's loss, before the optimizer step.
struct StepGradients {
    SceneGradients scene; // positions and rot_quats are canonical
    LossRecord losses;
};

class Trainer {
public:
    Trainer(const data::SceneDataset &dataset, TrainConfig config, Model model);

    int iteration() const noexcept { return mIteration; }
    bool finished() const noexcept { return mIteration >= mConfig.iterations; }
    bool fine_phase() const noexcept { return mIteration >= mConfig.coarse_iterations; }

    const Model &model() const noexcept { return mModel; }
    const TrainConfig &config() const noexcept { return mConfig; }
    const std::vector<std::uint8_t> &dynamic_flags() const noexcept { return mDynamic; }
    const std::vector<std::uint32_t> &knn() const noexcept { return mKnn; }

    /// Samples a training frame and performs one iteration.
    LossRecord step();

    /// One iteration on the given dataset frame.
    LossRecord step_on(std::size_t frame);

    /// Loss terms and gradients for a frame at the current parameters. Field
    /// gradients are left in field_gradients().
    StepGradients compute_gradients(std::size_t frame);
    const field::FieldGradients &field_gradients() const noexcept { return mFieldGrads; }

    /// Loss terms for a frame without touching any state.
    LossRecord evaluate(std::size_t frame) const;

    /// Runs until config().iterations, calling `on_record` after every step.
    void run(const std::function<void(const LossRecord &)> &on_record = {});

private:
    struct TimeSet {
        int render = 0;
        int anchor = 0;
        int prev = 0, cur = 0, next = 0;
        bool momentum = false;
        std::vector<int> distinct;
    };

    TimeSet time_set(int time_index) const;
    void enter_fine_phase();
    void refresh_dynamic();
    void rebuild_knn();
    void prune();
    void apply(const StepGradients &grads);
    LossRecord losses_for(std::size_t frame, StepGradients *grads);

    const data::SceneDataset &mDataset;
    TrainConfig mConfig;
    Model mModel;
    int mIteration = 0;
    std::uint64_t mFieldSteps = 0;
    std::vector<std::uint8_t> mDynamic;
    std::vector<std::uint32_t> mKnn;
    std::vector<std::size_t> mCoarseFrames;
    std::vector<std::size_t> mFineFrames;
    std::mt19937_64 mRng;
    std::chrono::steady_clock::time_point mStart;

    AdamState mPositions, mRotations, mScales, mOpacities, mColors, mMasks;
    std::vector<AdamState> mPlaneStates, mLayerW, mLayerB;
    field::FieldGradients mFieldGrads;
};

} // namespace splattrack::train
