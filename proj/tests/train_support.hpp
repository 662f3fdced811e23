// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "field_support.hpp"

#include "splattrack/data/dataset.hpp"
#include "splattrack/train/render_pipeline.hpp"
#include "splattrack/train/trainer.hpp"

namespace splattrack::testing {

/// Small in-memory scene: a few static and moving Gaussians seen by three
/// cameras over `steps` timesteps. Moving Gaussians translate along +x.
struct ToyScene {
    data::SceneDataset dataset;
    GaussianSet truth;
};

inline ToyScene
make_toy_scene(Rng &rng, int steps = 4, int size = 20, std::size_t count = 24) {
    ToyScene scene;
    scene.truth = GaussianSet::with_size(count);
    GaussianSet &g = scene.truth;
    for (std::size_t i = 0; i < count; ++i) {
        g.set_position(i, Vec3(uniform(rng, -0.4, 0.4), uniform(rng, -0.4, 0.4), uniform(rng, -0.2, 0.2)));
        g.set_rotation(i, random_unit_quat(rng));
        for (int a = 0; a < 3; ++a) {
            g.log_scales[3 * i + a] = uniform(rng, -2.6, -2.0);
            g.colors[3 * i + a] = uniform(rng, 0.1, 0.9);
        }
        g.opacity_logits[i] = uniform(rng, 0.5, 2.0);
        g.mask_logits[i] = i % 2 == 0 ? 8.0 : -8.0;
    }
    data::SceneManifest &m = scene.dataset.manifest;
    m.num_timesteps = steps;
    m.bbox_min = Vec3(-0.6, -0.6, -0.4);
    m.bbox_max = Vec3(0.8, 0.6, 0.4);
    const double f = 1.2 * size;
    const Vec3 eyes[] = {{0.0, -0.3, -2.5}, {1.5, 0.2, -2.0}, {-1.4, 0.4, -2.0}};
    for (int c = 0; c < 3; ++c) {
        data::CameraRecord rec;
        rec.id = c;
        rec.camera = Camera::look_at(eyes[c], Vec3::Zero(), Vec3(0, -1, 0), f, f, size / 2.0, size / 2.0, size,
                                     size);
        rec.held_out = c == 2;
        m.cameras.push_back(rec);
    }
    for (int k = 0; k < steps; ++k) {
        const double t = m.time_of(k);
        field::DeformedState state = train::canonical_state(g);
        for (std::size_t i = 0; i < count; i += 2) {
            state.positions[3 * i] += 0.2 * t;
        }
        for (int c = 0; c < 3; ++c) {
            const train::RenderPass pass = train::render_state(g, state, m.cameras[c].camera, Vec3::Zero());
            data::FrameRecord fr;
            fr.camera_id = c;
            fr.time_index = k;
            fr.image_path = "unused.png";
            fr.mask_path = "unused_mask.png";
            m.frames.push_back(fr);
            data::FrameData fd;
            fd.camera = static_cast<std::size_t>(c);
            fd.time_index = k;
            fd.rgb = pass.output.rgb;
            fd.mask.resize(pass.output.mask.size());
            for (std::size_t p = 0; p < fd.mask.size(); ++p) {
                fd.mask[p] = pass.output.mask[p] > 0.5 ? 1.0 : 0.0;
            }
            scene.dataset.frames.push_back(std::move(fd));
        }
    }
    return scene;
}

inline train::TrainConfig
toy_config() {
    train::TrainConfig cfg;
    cfg.iterations = 40;
    cfg.coarse_iterations = 10;
    cfg.prune_interval = 10;
    cfg.knn_k = 3;
    cfg.init_points = 60;
    cfg.field = tiny_field_config();
    return cfg;
}

} // namespace splattrack::testing
