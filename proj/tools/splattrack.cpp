// Copyright Contributors to the splattrack project
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: scene generation, training, rendering, tracking
// and evaluation.
#include "splattrack/core/error.hpp"
#include "splattrack/core/parallel.hpp"
#include "splattrack/data/checkpoint.hpp"
#include "splattrack/data/dataset.hpp"
#include "splattrack/data/png_io.hpp"
#include "splattrack/data/scene_gen.hpp"
#include "splattrack/data/trajectory_io.hpp"
#include "splattrack/track/metrics.hpp"
#include "splattrack/track/tracking.hpp"
#include "splattrack/train/render_pipeline.hpp"
#include "splattrack/train/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace splattrack;

namespace {

std::string
read_text(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        fail(Errc::missing_file, "cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void
write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    out << text;
    if (!out) {
        fail(Errc::io_error, "cannot write " + path.string());
    }
}

struct GenArgs {
    data::SceneSpec spec;
    std::string deformation = "drop_on_sphere";
    std::string texture = "noise";
    std::string out;
};

void
run_gen(GenArgs &a) {
    if (a.out.empty()) {
        const char *env = std::getenv("SPLATTRACK_OUTPUT_DIR");
        if (env == nullptr || *env == '\0') {
            fail(Errc::usage, "gen-scene: pass --out or set SPLATTRACK_OUTPUT_DIR");
        }
        a.out = env;
    }
    a.spec.deformation = data::parse_deformation(a.deformation);
    a.spec.texture = data::parse_texture(a.texture);
    const data::SceneManifest m = data::generate_scene(a.spec, a.out);
    std::cout << "wrote " << m.frames.size() << " frames to " << a.out << "\n";
}

struct TrainArgs {
    std::string data;
    std::string config;
    std::string out;
    std::string log;
    int iterations = 0;
    int coarse = 0;
    std::uint64_t seed = 0;
    double lambda_iso = 0, lambda_momentum = 0, lambda_w = 0, mask_weight = 0;
    int knn_k = 0, init_points = 0;
    CLI::Option *o_iterations = nullptr, *o_coarse = nullptr, *o_seed = nullptr, *o_iso = nullptr,
                *o_momentum = nullptr, *o_w = nullptr, *o_mask = nullptr, *o_k = nullptr, *o_points = nullptr;
};

void
run_train(TrainArgs &a) {
    train::TrainConfig cfg;
    if (!a.config.empty()) {
        cfg = train::config_from_json(read_text(a.config), cfg);
    }
    if (a.o_iterations->count()) cfg.iterations = a.iterations;
    if (a.o_coarse->count()) cfg.coarse_iterations = a.coarse;
    if (a.o_seed->count()) cfg.seed = a.seed;
    if (a.o_iso->count()) cfg.lambda_iso = a.lambda_iso;
    if (a.o_momentum->count()) cfg.lambda_momentum = a.lambda_momentum;
    if (a.o_w->count()) cfg.lambda_w = a.lambda_w;
    if (a.o_mask->count()) cfg.mask_loss_weight = a.mask_weight;
    if (a.o_k->count()) cfg.knn_k = a.knn_k;
    if (a.o_points->count()) cfg.init_points = a.init_points;
    cfg.validate();

    const data::SceneDataset ds = data::load_dataset(a.data);
    train::Trainer trainer(ds, cfg, train::initialize_model(ds, cfg));
    std::ofstream logFile;
    std::ostream *log = &std::cout;
    if (!a.log.empty()) {
        logFile.open(a.log);
        if (!logFile) {
            fail(Errc::io_error, "cannot write " + a.log);
        }
        log = &logFile;
    }
    trainer.run([&](const train::LossRecord &r) { *log << r.to_json() << "\n"; });
    data::save_checkpoint(a.out, {trainer.model(), trainer.config(), trainer.iteration()});
}

struct RenderArgs {
    std::string checkpoint, data, out, mask_out;
    int camera = 0;
    double time = 0.0;
};

void
run_render(const RenderArgs &a) {
    const data::Checkpoint ck = data::load_checkpoint(a.checkpoint);
    const data::SceneManifest m = data::load_manifest(fs::path(a.data) / data::kManifestFile);
    const int ci = m.camera_index(a.camera);
    if (ci < 0) {
        fail(Errc::invalid_parameter, "render: no camera with id " + std::to_string(a.camera));
    }
    if (!(a.time >= 0.0 && a.time <= 1.0)) {
        fail(Errc::invalid_parameter, "render: --time must lie in [0,1]");
    }
    const Camera &cam = m.cameras[static_cast<std::size_t>(ci)].camera;
    const field::DeformedState st = train::model_state(ck.model, a.time, ck.config.dynamic_threshold);
    const train::RenderPass pass = train::render_state(ck.model.gaussians, st, cam, ck.config.background);
    data::write_png(a.out, data::Image::from_unit(pass.output.rgb, cam.width, cam.height, 3));
    if (!a.mask_out.empty()) {
        data::write_png(a.mask_out, data::Image::from_unit(pass.output.mask, cam.width, cam.height, 1));
    }
}

struct TrackArgs {
    std::string checkpoint, query, out, data;
    bool all_dynamic = false;
    std::size_t knn = track::kDefaultKnnSize;
    int timesteps = 0;
};

std::vector<double>
uniform_times(int steps) {
    data::SceneManifest m;
    m.num_timesteps = steps;
    return m.times();
}

void
run_track(const TrackArgs &a) {
    const data::Checkpoint ck = data::load_checkpoint(a.checkpoint);
    std::vector<double> times;
    if (!a.data.empty()) {
        times = data::load_manifest(fs::path(a.data) / data::kManifestFile).times();
    } else if (a.timesteps > 0) {
        times = uniform_times(a.timesteps);
    }
    TrajectorySet out;
    if (a.all_dynamic) {
        if (times.empty()) {
            fail(Errc::usage, "track: --all-dynamic needs --data or --timesteps");
        }
        out = track::gaussian_trajectories(ck.model.gaussians, ck.model.field, times, ck.config.dynamic_threshold);
    } else {
        track::TrackQuery q;
        if (fs::path(a.query).extension() == ".json") {
            const nlohmann::json j = nlohmann::json::parse(read_text(a.query));
            q.t0 = j.value("t0", 0.0);
            for (const auto &p : j.at("points")) {
                for (int c = 0; c < 3; ++c) {
                    q.points.push_back(p.at(c).get<double>());
                }
            }
            if (j.contains("eval_times")) {
                times = j.at("eval_times").get<std::vector<double>>();
            }
        } else {
            // A trajectory file: its first step gives the query points and
            // its timestamps the evaluation times.
            const TrajectorySet ref = data::read_trajectories(a.query);
            q.t0 = ref.times.empty() ? 0.0 : ref.times.front();
            for (std::size_t i = 0; i < ref.num_points; ++i) {
                const Vec3 p = ref.at(i, 0);
                q.points.insert(q.points.end(), {p.x(), p.y(), p.z()});
            }
            if (times.empty()) {
                times = ref.times;
            }
        }
        if (times.empty()) {
            fail(Errc::usage, "track: no evaluation times (give --data, --timesteps or eval_times)");
        }
        q.eval_times = times;
        track::TrackOptions opt;
        opt.knn_size = a.knn;
        opt.dynamic_threshold = ck.config.dynamic_threshold;
        out = track::track_point(q, ck.model.gaussians, ck.model.field, opt);
    }
    data::write_trajectories(a.out, out);
}

struct EvalArgs {
    std::string pred, gt, out;
    std::size_t samples = track::kDefaultSampleCount;
    std::uint64_t seed = 0;
};

void
run_eval(const EvalArgs &a) {
    TrajectorySet pred = data::read_trajectories(a.pred);
    TrajectorySet gt = data::read_trajectories(a.gt);
    if (pred.num_points != gt.num_points) {
        fail(Errc::shape_mismatch, "eval: prediction has " + std::to_string(pred.num_points) +
                                       " points, ground truth " + std::to_string(gt.num_points));
    }
    const std::vector<std::size_t> idx = track::sample_points(gt.num_points, a.samples, a.seed);
    pred = track::select_points(pred, idx);
    gt = track::select_points(gt, idx);
    const std::string report = track::evaluate_tracks(pred, gt).to_json();
    if (!a.out.empty()) {
        write_text(a.out, report + "\n");
    }
    std::cout << report << "\n";
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"Dynamic Gaussian splatting for point tracking"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    GenArgs gen;
    CLI::App *g = app.add_subcommand("gen-scene", "Generate a synthetic multi-view scene");
    g->add_option("--out", gen.out, "Output directory (default: $SPLATTRACK_OUTPUT_DIR)");
    g->add_option("--grid-res", gen.spec.grid_res, "Sheet points per side")->capture_default_str();
    g->add_option("--cameras", gen.spec.num_cameras, "Training cameras")->capture_default_str();
    g->add_option("--held-out", gen.spec.held_out_cameras, "Held-out cameras")->capture_default_str();
    g->add_option("--timesteps", gen.spec.num_timesteps, "Timesteps")->capture_default_str();
    g->add_option("--image-size", gen.spec.image_size, "Image width and height")->capture_default_str();
    g->add_option("--ground-res", gen.spec.ground_res, "Ground points per side")->capture_default_str();
    g->add_option("--deformation", gen.deformation, "none | wave | drop_on_sphere")->capture_default_str();
    g->add_option("--texture", gen.texture, "noise | checker | half_uniform")->capture_default_str();
    g->add_option("--seed", gen.spec.seed, "Random seed")->capture_default_str();

    TrainArgs tr;
    CLI::App *t = app.add_subcommand("train", "Train a model on a dataset");
    t->add_option("--data", tr.data, "Dataset directory")->required();
    t->add_option("--out", tr.out, "Checkpoint to write")->required();
    t->add_option("--config", tr.config, "JSON config file");
    t->add_option("--log", tr.log, "Training log (JSON lines; default stdout)");
    tr.o_iterations = t->add_option("--iterations", tr.iterations);
    tr.o_coarse = t->add_option("--coarse-iterations", tr.coarse);
    tr.o_seed = t->add_option("--seed", tr.seed);
    tr.o_iso = t->add_option("--lambda-iso", tr.lambda_iso);
    tr.o_momentum = t->add_option("--lambda-momentum", tr.lambda_momentum);
    tr.o_w = t->add_option("--lambda-w", tr.lambda_w);
    tr.o_mask = t->add_option("--mask-loss-weight", tr.mask_weight);
    tr.o_k = t->add_option("--knn-k", tr.knn_k);
    tr.o_points = t->add_option("--init-points", tr.init_points);

    RenderArgs re;
    CLI::App *r = app.add_subcommand("render", "Render a checkpoint from a dataset camera");
    r->add_option("--checkpoint", re.checkpoint)->required();
    r->add_option("--data", re.data, "Dataset directory holding the camera")->required();
    r->add_option("--camera", re.camera, "Camera id")->required();
    r->add_option("--time", re.time, "Normalized time in [0,1]")->capture_default_str();
    r->add_option("--out", re.out, "PNG to write")->required();
    r->add_option("--mask-out", re.mask_out, "Also write the rendered mask");

    TrackArgs tk;
    CLI::App *k = app.add_subcommand("track", "Track query points or all dynamic Gaussians");
    k->add_option("--checkpoint", tk.checkpoint)->required();
    k->add_option("--out", tk.out, "Trajectory file to write")->required();
    auto *q = k->add_option("--query", tk.query, "Query JSON {t0, points, eval_times} or trajectory file");
    auto *all = k->add_flag("--all-dynamic", tk.all_dynamic, "Track every dynamic Gaussian centre");
    q->excludes(all);
    k->add_option("--data", tk.data, "Dataset whose timesteps are used as evaluation times");
    k->add_option("--timesteps", tk.timesteps, "Evaluate at k/(T-1) for k < T");
    k->add_option("--knn-size", tk.knn, "Neighbours per query point")->capture_default_str();

    EvalArgs ev;
    CLI::App *e = app.add_subcommand("eval", "Compare predicted and ground-truth trajectories");
    e->add_option("--pred", ev.pred)->required();
    e->add_option("--gt", ev.gt)->required();
    e->add_option("--out", ev.out, "Report file to write");
    e->add_option("--samples", ev.samples, "Sampled points")->capture_default_str();
    e->add_option("--seed", ev.seed, "Sampling seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &err) {
        return app.exit(err, std::cout, std::cerr);
    }

    try {
        set_num_threads(threads);
        if (*g) {
            run_gen(gen);
        } else if (*t) {
            run_train(tr);
        } else if (*r) {
            run_render(re);
        } else if (*k) {
            if (!tk.all_dynamic && tk.query.empty()) {
                fail(Errc::usage, "track: give --query or --all-dynamic");
            }
            run_track(tk);
        } else if (*e) {
            run_eval(ev);
        }
    } catch (const Error &err) {
        std::cerr << "error: " << err.what() << "\n";
        return err.code() == Errc::usage ? 2 : 1;
    } catch (const std::exception &err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
