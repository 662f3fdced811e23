// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/train/trainer.hpp"

#include "splattrack/core/error.hpp"
#include "splattrack/core/geometry.hpp"
#include "splattrack/core/knn.hpp"
#include "splattrack/train/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>

namespace splattrack::train {

namespace {

void
check_finite(double value, const char *term, int iteration) {
    if (!std::isfinite(value)) {
        fail(Errc::divergence, "iteration " + std::to_string(iteration) + ": non-finite " + term + " loss");
    }
}

std::vector<double>
gather_rows(const std::vector<double> &src, std::span<const std::uint32_t> rows) {
    std::vector<double> out(3 * rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < 3; ++c) {
            out[3 * r + c] = src[3 * rows[r] + c];
        }
    }
    return out;
}

void
scatter_rows(const std::vector<double> &src, std::span<const std::uint32_t> rows, std::vector<double> &dst) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < 3; ++c) {
            dst[3 * rows[r] + c] += src[3 * r + c];
        }
    }
}

std::vector<std::uint32_t>
flagged(const std::vector<std::uint8_t> &flags) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) {
            out.push_back(static_cast<std::uint32_t>(i));
        }
    }
    return out;
}

} // namespace

std::vector<std::uint8_t>
select_dynamic(const GaussianSet &set, double threshold) {
    std::vector<std::uint8_t> flags(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        flags[i] = set.mask_value(i) > threshold ? 1 : 0;
    }
    return flags;
}

field::DeformedState
model_state(const Model &model, double t, double dynamic_threshold) {
    if (!model.fine) {
        return canonical_state(model.gaussians);
    }
    return field::deform(model.gaussians, select_dynamic(model.gaussians, dynamic_threshold), t, model.field);
}

Model
initialize_model(const data::SceneDataset &dataset, const TrainConfig &config) {
    config.validate();
    const Vec3 lo = dataset.manifest.bbox_min;
    const Vec3 hi = dataset.manifest.bbox_max;
    if (!((hi - lo).array() > 0.0).all()) {
        fail(Errc::invalid_config, "dataset bbox must have positive extent to seed the point cloud");
    }
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(config.init_points);
    Model model;
    model.gaussians = GaussianSet::with_size(n);
    GaussianSet &g = model.gaussians;
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            g.positions[3 * i + a] = lo[a] + unit(rng) * (hi[a] - lo[a]);
        }
    }
    const KnnGrid grid(g.positions);
    const double opacityLogit = std::log(config.init_opacity / (1.0 - config.init_opacity));
    for (std::size_t i = 0; i < n; ++i) {
        const auto nn = grid.nearest(g.position(i), 3, static_cast<std::uint32_t>(i));
        double mean = 0.0;
        for (const Neighbor &nb : nn) {
            mean += std::sqrt(nb.dist2);
        }
        mean = nn.empty() ? 0.01 * (hi - lo).norm() : mean / static_cast<double>(nn.size());
        mean = std::max(mean, 1e-7);
        for (int a = 0; a < 3; ++a) {
            g.log_scales[3 * i + a] = std::log(mean);
            g.colors[3 * i + a] = 0.5;
        }
        g.set_rotation(i, Vec4(1, 0, 0, 0));
        g.opacity_logits[i] = opacityLogit;
        g.mask_logits[i] = 0.0;
    }
    model.field = field::DeformationField::create(config.field, field::Aabb::around(g.positions, 0.1),
                                                  config.seed + 0x9e3779b97f4a7c15ULL);
    return model;
}

std::string
LossRecord::to_json() const {
    nlohmann::json j = {{"iteration", iteration},
                        {"phase", fine ? "fine" : "coarse"},
                        {"camera_id", camera_id},
                        {"time_index", time_index},
                        {"photometric", photometric},
                        {"mask", mask},
                        {"iso", iso},
                        {"momentum", momentum},
                        {"total", total},
                        {"gaussians", gaussians},
                        {"dynamic", dynamic},
                        {"wall_time", wall_time}};
    return j.dump();
}

Trainer::Trainer(const data::SceneDataset &dataset, TrainConfig config, Model model)
    : mDataset(dataset), mConfig(std::move(config)), mModel(std::move(model)), mRng(mConfig.seed ^ 0x5bd1e995ULL),
      mStart(std::chrono::steady_clock::now()) {
    mConfig.validate();
    mModel.gaussians.validate();
    mModel.field.validate();
    const std::size_t n = mModel.gaussians.size();
    if (n == 0) {
        fail(Errc::degenerate_scene, "trainer: the model has no Gaussians");
    }
    for (std::size_t f : dataset.training_frames()) {
        mFineFrames.push_back(f);
        if (dataset.frames[f].time_index == 0) {
            mCoarseFrames.push_back(f);
        }
    }
    if (mFineFrames.empty()) {
        fail(Errc::invalid_config, "trainer: the dataset has no training frames");
    }
    if (mCoarseFrames.empty() && mConfig.coarse_iterations > 0) {
        fail(Errc::invalid_config, "trainer: no training frame at the first timestep for the coarse phase");
    }
    mPositions = AdamState(3 * n);
    mRotations = AdamState(4 * n);
    mScales = AdamState(3 * n);
    mOpacities = AdamState(n);
    mColors = AdamState(3 * n);
    mMasks = AdamState(n);
    mDynamic = select_dynamic(mModel.gaussians, mConfig.dynamic_threshold);
    if (mModel.fine) {
        enter_fine_phase();
    }
}

Trainer::TimeSet
Trainer::time_set(int i) const {
    const int steps = mDataset.manifest.num_timesteps;
    TimeSet ts;
    ts.render = i;
    ts.anchor = 0;
    if (steps >= 3) {
        ts.momentum = true;
        const int mid = std::clamp(i, 1, steps - 2);
        ts.prev = mid - 1;
        ts.cur = mid;
        ts.next = mid + 1;
    }
    ts.distinct = {ts.anchor, ts.render};
    if (ts.momentum) {
        ts.distinct.insert(ts.distinct.end(), {ts.prev, ts.cur, ts.next});
    }
    std::sort(ts.distinct.begin(), ts.distinct.end());
    ts.distinct.erase(std::unique(ts.distinct.begin(), ts.distinct.end()), ts.distinct.end());
    return ts;
}

void
Trainer::refresh_dynamic() {
    mDynamic = select_dynamic(mModel.gaussians, mConfig.dynamic_threshold);
}

void
Trainer::rebuild_knn() {
    const std::vector<std::uint32_t> dyn = flagged(mDynamic);
    const std::vector<double> pos = gather_rows(mModel.gaussians.positions, dyn);
    if (mConfig.lambda_iso > 0.0) {
        if (static_cast<std::size_t>(mConfig.knn_k) >= dyn.size()) {
            fail(Errc::invalid_config, "trainer: knn_k = " + std::to_string(mConfig.knn_k) +
                                           " needs more dynamic Gaussians (have " + std::to_string(dyn.size()) +
                                           ")");
        }
        mKnn = knn_graph(pos, static_cast<std::size_t>(mConfig.knn_k));
    } else {
        mKnn.clear();
    }
}

void
Trainer::enter_fine_phase() {
    mModel.fine = true;
    refresh_dynamic();
    if (std::none_of(mDynamic.begin(), mDynamic.end(), [](std::uint8_t f) { return f != 0; })) {
        fail(Errc::degenerate_scene, "trainer: no dynamic Gaussians at the start of the fine phase");
    }
    rebuild_knn();
    const field::DeformationField &f = mModel.field;
    mFieldGrads = field::FieldGradients::like(f);
    mPlaneStates.clear();
    for (const field::Plane &p : f.planes()) {
        mPlaneStates.emplace_back(p.values.size());
    }
    mLayerW.clear();
    mLayerB.clear();
    for (const field::DenseLayer &d : f.layers()) {
        mLayerW.emplace_back(d.w.size());
        mLayerB.emplace_back(d.b.size());
    }
}

LossRecord
Trainer::losses_for(std::size_t frameIndex, StepGradients *grads) {
    const data::FrameData &frame = mDataset.frames.at(frameIndex);
    const Camera &cam = mDataset.camera_of(frame);
    const GaussianSet &set = mModel.gaussians;
    const std::size_t n = set.size();
    const bool withGrad = grads != nullptr;

    LossRecord rec;
    rec.iteration = mIteration;
    rec.fine = mModel.fine;
    rec.camera_id = mDataset.manifest.cameras[frame.camera].id;
    rec.time_index = frame.time_index;
    rec.gaussians = n;
    rec.dynamic = static_cast<std::size_t>(std::count(mDynamic.begin(), mDynamic.end(), 1));

    const std::size_t pixels = static_cast<std::size_t>(cam.width) * cam.height;
    std::vector<double> gRgb(withGrad ? 3 * pixels : 0), gMask(withGrad ? pixels : 0, 0.0);

    if (!mModel.fine) {
        const std::vector<std::uint8_t> none(n, 0);
        field::FieldTape tape;
        const field::DeformedState state = field::deform(set, none, 0.0, mModel.field, &tape);
        const RenderPass pass = render_state(set, state, cam, mConfig.background);
        rec.photometric = l1_loss(pass.output.rgb, frame.rgb, gRgb);
        if (!frame.mask.empty() && mConfig.mask_loss_weight > 0.0) {
            rec.mask = mask_loss(pass.output.mask, frame.mask, gMask, mConfig.mask_loss_weight);
        }
        if (withGrad) {
            grads->scene = SceneGradients::zeros(n);
            SceneGradients &sg = grads->scene;
            render_backward(set, state, cam, pass, gRgb, gMask, sg);
            field::DeformedGrad dg;
            dg.positions = std::move(sg.positions);
            dg.rot_quats = std::move(sg.rot_quats);
            dg.shadows = std::move(sg.shadows);
            sg.positions.assign(3 * n, 0.0);
            sg.rot_quats.assign(4 * n, 0.0);
            sg.shadows.assign(n, 0.0);
            field::FieldGradients unused;
            field::field_backward(mModel.field, tape, dg, unused, sg.positions, sg.rot_quats);
        }
    } else {
        const TimeSet ts = time_set(frame.time_index);
        std::map<int, field::DeformedState> states;
        std::map<int, field::FieldTape> tapes;
        std::map<int, field::DeformedGrad> dgs;
        for (int k : ts.distinct) {
            states[k] = field::deform(set, mDynamic, mDataset.manifest.time_of(k), mModel.field, &tapes[k]);
            if (withGrad) {
                dgs[k] = field::DeformedGrad::zeros(n);
            }
        }
        const field::DeformedState &renderState = states.at(ts.render);
        const RenderPass pass = render_state(set, renderState, cam, mConfig.background);
        rec.photometric = l1_loss(pass.output.rgb, frame.rgb, gRgb);
        if (!frame.mask.empty() && mConfig.mask_loss_weight > 0.0) {
            rec.mask = mask_loss(pass.output.mask, frame.mask, gMask, mConfig.mask_loss_weight);
        }
        SceneGradients sg;
        if (withGrad) {
            sg = SceneGradients::zeros(n);
            render_backward(set, renderState, cam, pass, gRgb, gMask, sg);
            field::DeformedGrad &dr = dgs.at(ts.render);
            dr.positions = sg.positions;
            dr.rot_quats = sg.rot_quats;
            dr.shadows = sg.shadows;
        }

        const std::vector<std::uint32_t> dyn = flagged(mDynamic);
        if (mConfig.lambda_iso > 0.0 && !dyn.empty()) {
            const std::vector<double> p0 = gather_rows(states.at(ts.anchor).positions, dyn);
            const std::vector<double> pt = gather_rows(renderState.positions, dyn);
            std::vector<double> g0(withGrad ? p0.size() : 0, 0.0), gt(withGrad ? pt.size() : 0, 0.0);
            rec.iso = iso_loss(p0, pt, mKnn, mConfig.lambda_w, static_cast<std::size_t>(mConfig.knn_k), g0, gt,
                               mConfig.lambda_iso);
            if (withGrad) {
                scatter_rows(g0, dyn, dgs.at(ts.anchor).positions);
                scatter_rows(gt, dyn, dgs.at(ts.render).positions);
            }
        }
        if (mConfig.lambda_momentum > 0.0 && ts.momentum && !dyn.empty()) {
            const std::vector<double> a = gather_rows(states.at(ts.prev).positions, dyn);
            const std::vector<double> b = gather_rows(states.at(ts.cur).positions, dyn);
            const std::vector<double> c = gather_rows(states.at(ts.next).positions, dyn);
            const std::size_t m = withGrad ? a.size() : 0;
            std::vector<double> ga(m, 0.0), gb(m, 0.0), gc(m, 0.0);
            rec.momentum = momentum_loss(a, b, c, ga, gb, gc, mConfig.lambda_momentum);
            if (withGrad) {
                scatter_rows(ga, dyn, dgs.at(ts.prev).positions);
                scatter_rows(gb, dyn, dgs.at(ts.cur).positions);
                scatter_rows(gc, dyn, dgs.at(ts.next).positions);
            }
        }
        if (withGrad) {
            sg.positions.assign(3 * n, 0.0);
            sg.rot_quats.assign(4 * n, 0.0);
            sg.shadows.assign(n, 0.0);
            for (int k : ts.distinct) {
                field::field_backward(mModel.field, tapes.at(k), dgs.at(k), mFieldGrads, sg.positions,
                                      sg.rot_quats);
            }
            grads->scene = std::move(sg);
        }
    }
    check_finite(rec.photometric, "photometric", mIteration);
    check_finite(rec.mask, "mask", mIteration);
    check_finite(rec.iso, "iso", mIteration);
    check_finite(rec.momentum, "momentum", mIteration);
    rec.total = rec.photometric + mConfig.mask_loss_weight * rec.mask + mConfig.lambda_iso * rec.iso +
                mConfig.lambda_momentum * rec.momentum;
    check_finite(rec.total, "total", mIteration);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - mStart).count();
    if (grads != nullptr) {
        grads->losses = rec;
    }
    return rec;
}

StepGradients
Trainer::compute_gradients(std::size_t frame) {
    if (fine_phase() && mFieldGrads.planes.empty()) {
        enter_fine_phase();
    }
    if (!mFieldGrads.planes.empty()) {
        mFieldGrads.clear();
    }
    StepGradients g;
    losses_for(frame, &g);
    return g;
}

LossRecord
Trainer::evaluate(std::size_t frame) const {
    return const_cast<Trainer *>(this)->losses_for(frame, nullptr);
}

void
Trainer::apply(const StepGradients &grads) {
    const std::uint64_t t = static_cast<std::uint64_t>(mIteration) + 1;
    GaussianSet &set = mModel.gaussians;
    const SceneGradients &g = grads.scene;
    const LearningRates &lr = mConfig.lr;
    mPositions.update(set.positions, g.positions, lr.positions, t);
    mRotations.update(set.rot_quats, g.rot_quats, lr.rotations, t);
    mScales.update(set.log_scales, g.log_scales, lr.scales, t);
    mOpacities.update(set.opacity_logits, g.opacity_logits, lr.opacities, t);
    mColors.update(set.colors, g.colors, lr.colors, t);
    mMasks.update(set.mask_logits, g.mask_logits, lr.mask_logits, t);
    for (double &c : set.colors) {
        c = std::clamp(c, 0.0, 1.0);
    }
    if (mModel.fine) {
        ++mFieldSteps;
        field::DeformationField &f = mModel.field;
        for (std::size_t l = 0; l < f.layers().size(); ++l) {
            mLayerW[l].update(f.layers()[l].w, mFieldGrads.layers[l].w, lr.mlp, mFieldSteps);
            mLayerB[l].update(f.layers()[l].b, mFieldGrads.layers[l].b, lr.mlp, mFieldSteps);
        }
        const std::size_t h = static_cast<std::size_t>(f.config().feature_size);
        for (std::size_t p = 0; p < f.planes().size(); ++p) {
            mPlaneStates[p].update_blocks(f.planes()[p].values, mFieldGrads.planes[p], mFieldGrads.touched[p], h,
                                          lr.planes, mFieldSteps);
        }
    }
}

void
Trainer::prune() {
    GaussianSet &set = mModel.gaussians;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (!(set.opacity(i) < mConfig.prune_opacity)) {
            keep.push_back(i);
        }
    }
    if (keep.size() != set.size()) {
        set = set.select(keep);
        mPositions.select_rows(keep, 3);
        mRotations.select_rows(keep, 4);
        mScales.select_rows(keep, 3);
        mOpacities.select_rows(keep, 1);
        mColors.select_rows(keep, 3);
        mMasks.select_rows(keep, 1);
    }
    if (set.empty()) {
        fail(Errc::degenerate_scene, "iteration " + std::to_string(mIteration) + ": pruning removed every Gaussian");
    }
    const std::vector<std::uint8_t> before = keep.size() != mDynamic.size() ? std::vector<std::uint8_t>{} : mDynamic;
    refresh_dynamic();
    if (mModel.fine) {
        if (std::none_of(mDynamic.begin(), mDynamic.end(), [](std::uint8_t f) { return f != 0; })) {
            fail(Errc::degenerate_scene,
                 "iteration " + std::to_string(mIteration) + ": no dynamic Gaussians left after pruning");
        }
        if (before != mDynamic) {
            rebuild_knn();
        }
    }
}

LossRecord
Trainer::step_on(std::size_t frame) {
    if (finished()) {
        fail(Errc::invalid_config, "trainer: all iterations are done");
    }
    const StepGradients grads = compute_gradients(frame);
    apply(grads);
    if ((mIteration + 1) % mConfig.prune_interval == 0) {
        prune();
    }
    ++mIteration;
    return grads.losses;
}

LossRecord
Trainer::step() {
    const std::vector<std::size_t> &pool = fine_phase() ? mFineFrames : mCoarseFrames;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return step_on(pool[pick(mRng)]);
}

void
Trainer::run(const std::function<void(const LossRecord &)> &on_record) {
    while (!finished()) {
        const LossRecord rec = step();
        if (on_record) {
            on_record(rec);
        }
    }
}

} // namespace splattrack::train
