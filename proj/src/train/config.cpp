// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
#include "splattrack/train/config.hpp"

#include "splattrack/core/error.hpp"

#include <json.hpp>

#include <cmath>

namespace splattrack::train {

using nlohmann::json;

void
TrainConfig::validate() const {
    auto bad = [](const std::string &what) { fail(Errc::invalid_config, "train config: " + what); };
    if (iterations < 0 || coarse_iterations < 0) {
        bad("iteration counts must be non-negative");
    }
    if (prune_interval < 1) {
        bad("prune_interval must be at least 1");
    }
    for (double v : {lambda_w, lambda_momentum, lambda_iso, mask_loss_weight}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            bad("loss weights must be finite and non-negative");
        }
    }
    if (knn_k < 1) {
        bad("knn_k must be at least 1");
    }
    if (!(dynamic_threshold > 0.0 && dynamic_threshold < 1.0) || !(prune_opacity > 0.0 && prune_opacity < 1.0)) {
        bad("thresholds must lie in (0,1)");
    }
    for (double v : {lr.positions, lr.rotations, lr.scales, lr.opacities, lr.colors, lr.mask_logits, lr.planes,
                     lr.mlp}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            bad("learning rates must be finite and non-negative");
        }
    }
    if (init_points < 1 || !(init_opacity > 0.0 && init_opacity < 1.0)) {
        bad("init_points must be positive and init_opacity in (0,1)");
    }
    if (!background.allFinite()) {
        bad("background must be finite");
    }
    if (dssim) {
        bad("the structural-similarity loss is not available");
    }
    field.validate();
}

std::string
config_to_json(const TrainConfig &c) {
    json j;
    j["iterations"] = c.iterations;
    j["coarse_iterations"] = c.coarse_iterations;
    j["prune_interval"] = c.prune_interval;
    j["lambda_w"] = c.lambda_w;
    j["lambda_momentum"] = c.lambda_momentum;
    j["lambda_iso"] = c.lambda_iso;
    j["knn_k"] = c.knn_k;
    j["mask_loss_weight"] = c.mask_loss_weight;
    j["dynamic_threshold"] = c.dynamic_threshold;
    j["prune_opacity"] = c.prune_opacity;
    j["seed"] = c.seed;
    j["init_points"] = c.init_points;
    j["init_opacity"] = c.init_opacity;
    j["background"] = {c.background.x(), c.background.y(), c.background.z()};
    j["dssim"] = c.dssim;
    j["lr"] = {{"positions", c.lr.positions}, {"rotations", c.lr.rotations},     {"scales", c.lr.scales},
               {"opacities", c.lr.opacities}, {"colors", c.lr.colors},           {"mask_logits", c.lr.mask_logits},
               {"planes", c.lr.planes},       {"mlp", c.lr.mlp}};
    j["field"] = {{"base_resolution", {c.field.base_resolution[0], c.field.base_resolution[1]}},
                  {"levels", c.field.levels},
                  {"feature_size", c.field.feature_size},
                  {"hidden_width", c.field.hidden_width},
                  {"hidden_layers", c.field.hidden_layers},
                  {"shadow_bias_init", c.field.shadow_bias_init}};
    return j.dump(2);
}

namespace {

template <class T>
void
take(const json &j, const char *key, T &out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

void
reject_unknown(const json &j, std::initializer_list<const char *> keys, const std::string &where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char *k : keys) {
            known = known || it.key() == k;
        }
        if (!known) {
            fail(Errc::invalid_config, "train config: unknown key '" + where + it.key() + "'");
        }
    }
}

} // namespace

TrainConfig
config_from_json(const std::string &text, TrainConfig c) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        fail(Errc::invalid_config, std::string("train config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) {
        fail(Errc::invalid_config, "train config: expected a JSON object");
    }
    reject_unknown(j,
                   {"iterations", "coarse_iterations", "prune_interval", "lambda_w", "lambda_momentum", "lambda_iso",
                    "knn_k", "mask_loss_weight", "dynamic_threshold", "prune_opacity", "seed", "init_points",
                    "init_opacity", "background", "dssim", "lr", "field"},
                   "");
    try {
        take(j, "iterations", c.iterations);
        take(j, "coarse_iterations", c.coarse_iterations);
        take(j, "prune_interval", c.prune_interval);
        take(j, "lambda_w", c.lambda_w);
        take(j, "lambda_momentum", c.lambda_momentum);
        take(j, "lambda_iso", c.lambda_iso);
        take(j, "knn_k", c.knn_k);
        take(j, "mask_loss_weight", c.mask_loss_weight);
        take(j, "dynamic_threshold", c.dynamic_threshold);
        take(j, "prune_opacity", c.prune_opacity);
        take(j, "seed", c.seed);
        take(j, "init_points", c.init_points);
        take(j, "init_opacity", c.init_opacity);
        take(j, "dssim", c.dssim);
        if (j.contains("background")) {
            const auto bg = j["background"].get<std::vector<double>>();
            if (bg.size() != 3) {
                fail(Errc::invalid_config, "train config: background needs three values");
            }
            c.background = Vec3(bg[0], bg[1], bg[2]);
        }
        if (j.contains("lr")) {
            const json &l = j["lr"];
            reject_unknown(l, {"positions", "rotations", "scales", "opacities", "colors", "mask_logits", "planes", "mlp"},
                           "lr.");
            take(l, "positions", c.lr.positions);
            take(l, "rotations", c.lr.rotations);
            take(l, "scales", c.lr.scales);
            take(l, "opacities", c.lr.opacities);
            take(l, "colors", c.lr.colors);
            take(l, "mask_logits", c.lr.mask_logits);
            take(l, "planes", c.lr.planes);
            take(l, "mlp", c.lr.mlp);
        }
        if (j.contains("field")) {
            const json &f = j["field"];
            reject_unknown(f,
                           {"base_resolution", "levels", "feature_size", "hidden_width", "hidden_layers",
                            "shadow_bias_init"},
                           "field.");
            if (f.contains("base_resolution")) {
                const auto r = f["base_resolution"].get<std::vector<int>>();
                if (r.size() != 2) {
                    fail(Errc::invalid_config, "train config: field.base_resolution needs two values");
                }
                c.field.base_resolution = {r[0], r[1]};
            }
            take(f, "levels", c.field.levels);
            take(f, "feature_size", c.field.feature_size);
            take(f, "hidden_width", c.field.hidden_width);
            take(f, "hidden_layers", c.field.hidden_layers);
            take(f, "shadow_bias_init", c.field.shadow_bias_init);
        }
    } catch (const json::exception &e) {
        fail(Errc::invalid_config, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

} // namespace splattrack::train
