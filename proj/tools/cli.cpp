// Copyright Contributors to the voxpad Project
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "voxpad/voxpad.hpp"

using namespace voxpad;
using json = nlohmann::ordered_json;

namespace {

// Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 unexpected.
constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct SharedFlags {
    std::string config_path;
    std::vector<std::string> sets;  // repeated key=value overrides
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int precision = 0;  // 0 = take from config
    int threads = 1;    // engine runs sequentially; the cap is recorded only
};

void add_shared_flags(CLI::App* cmd, SharedFlags& fl) {
    cmd->add_option("--config", fl.config_path, "run configuration file (key = value lines)");
    cmd->add_option("--set", fl.sets, "override one config key, e.g. --set epochs=4 (repeatable)");
    cmd->add_option("--out", fl.out, "output path");
    cmd->add_option("--seed", fl.seed, "random seed (overrides config)")
        ->each([&fl](const std::string&) { fl.seed_given = true; });
    cmd->add_option("--precision", fl.precision, "scalar precision")->check(CLI::IsMember({32, 64}));
    cmd->add_option("--threads", fl.threads, "worker cap (the engine is sequential today)")
        ->check(CLI::PositiveNumber);
}

RunConfig resolve_config(const SharedFlags& fl) {
    RunConfig cfg;
    if (!fl.config_path.empty()) cfg = load_config(fl.config_path);
    for (const std::string& kv : fl.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw InvalidInputError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (fl.seed_given) cfg.seed = fl.seed;
    if (fl.precision != 0) cfg.precision = fl.precision;
    cfg.validate();
    return cfg;
}

void print_resolved(const RunConfig& cfg) {
    std::cout << "# resolved config\n";
    std::istringstream is(cfg.resolved_text());
    std::string line;
    while (std::getline(is, line)) std::cout << "# " << line << "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidInputError("cannot open '" + path + "' for writing");
    os << text;
    if (!os) throw InvalidInputError("write failed for '" + path + "'");
}

//============================================================================
// stats: padding occupancy sweep -> CSV
//============================================================================

struct StatsArgs {
    SharedFlags fl;
    std::string input;
    std::vector<double> voxel_sizes = {0.1, 0.05, 0.025, 0.0125};
    std::vector<std::string> schemes = {"zero", "octree", "ring1", "interp"};
};

int cmd_stats(const StatsArgs& a) {
    RunConfig cfg = resolve_config(a.fl);
    print_resolved(cfg);

    PointCloud cloud;
    if (!a.input.empty()) {
        cloud = load_pointcloud(a.input);
    } else {
        SynthTask task = cfg.synth_task();
        cloud = task.generate();
    }
    const std::vector<PointCloud> clouds = {cloud};
    const int scalar_bytes = cfg.precision / 8;

    std::string csv = std::string(kPaddingCsvHeader) + ",time_ms,feature_bytes\n";
    for (double s : a.voxel_sizes) {
        if (!(s > 0.0)) throw InvalidInputError("stats: voxel sizes must be > 0");
        const GridSpec spec(cfg.origin, s, 0);
        const auto t = voxelize<double>(cloud, spec, FeatureMode::Mean);
        for (const std::string& name : a.schemes) {
            const PaddingScheme scheme = parse_padding_scheme(name);
            const auto t0 = std::chrono::steady_clock::now();
            const auto padded = apply_padding(t, scheme, clouds);
            const auto t1 = std::chrono::steady_clock::now();
            const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
            const PaddingReport rep = padding_stats(t, padded);
            // exact allocation: feature rows x channels x scalar plus the key index
            const std::int64_t bytes =
                rep.total * std::int64_t(padded.channels()) * scalar_bytes +
                rep.total * std::int64_t(sizeof(VoxelKey));
            char tail[64];
            std::snprintf(tail, sizeof(tail), ",%.3f,%lld", ms, (long long)bytes);
            csv += padding_csv_row(scheme, s, rep) + std::string(tail) + "\n";
        }
    }
    if (a.fl.out.empty())
        std::cout << csv;
    else
        write_text(a.fl.out, csv);
    return kExitOk;
}

//============================================================================
// synth: dataset generation -> point text file
//============================================================================

int cmd_synth(const SharedFlags& fl) {
    RunConfig cfg = resolve_config(fl);
    print_resolved(cfg);
    const SynthTask task = cfg.synth_task();
    const PointCloud cloud = task.generate();
    if (fl.out.empty()) {
        write_pointcloud(std::cout, cloud);
    } else {
        std::ofstream os(fl.out, std::ios::binary | std::ios::trunc);
        if (!os) throw InvalidInputError("cannot open '" + fl.out + "' for writing");
        write_pointcloud(os, cloud);
    }
    std::cout << "# wrote " << cloud.size() << " points, " << task.class_count() << " classes\n";
    return kExitOk;
}

//============================================================================
// train / eval: checkpoint + metrics JSON
//============================================================================

json run_entry(std::uint64_t seed, const SegMetrics& m, double ceiling, double final_loss,
               const PaddedFeatureStats& ps) {
    json run;
    run["seed"] = seed;
    run["accuracy"] = m.accuracy;
    run["miou"] = m.miou;
    run["per_class_iou"] = m.per_class_iou;
    run["majority_ceiling"] = ceiling;
    run["final_epoch_loss"] = final_loss;
    run["padded_rows"] = ps.padded_rows;
    run["padded_max_channel_variance"] = ps.max_channel_variance;
    run["padded_max_pairwise_diff"] = ps.max_pairwise_diff;
    return run;
}

json metrics_skeleton(const char* command, const RunConfig& cfg) {
    json out;
    out["format"] = "voxpad-metrics-v1";
    out["command"] = command;
    out["task"] = cfg.task;
    out["classes"] = cfg.synth_task().class_count();
    out["precision"] = cfg.precision;
    return out;
}

void emit_metrics(const json& metrics, const std::string& path) {
    const std::string text = metrics.dump(2) + "\n";
    if (path.empty())
        std::cout << text;
    else
        write_text(path, text);
}

template <class Scalar>
int train_with(const RunConfig& base, const SharedFlags& fl, int repeat,
               const std::string& metrics_path) {
    json metrics = metrics_skeleton("train", base);
    json runs = json::array();
    double acc_sum = 0.0, miou_sum = 0.0;
    std::vector<double> accs, mious;

    for (int r = 0; r < repeat; ++r) {
        RunConfig cfg = base;
        cfg.seed = base.seed + std::uint64_t(r);
        const TrainResult<Scalar> res = run_training<Scalar>(cfg);
        runs.push_back(run_entry(cfg.seed, res.test_metrics, res.ceiling, res.final_epoch_loss,
                                 res.padded_stats));
        metrics["parameter_count"] = res.parameter_count;
        accs.push_back(res.test_metrics.accuracy);
        mious.push_back(res.test_metrics.miou);
        acc_sum += res.test_metrics.accuracy;
        miou_sum += res.test_metrics.miou;
        if (!fl.out.empty()) {
            const std::string path =
                repeat == 1 ? fl.out : fl.out + ".s" + std::to_string(cfg.seed);
            save_checkpoint(path, res.checkpoint);
            std::cout << "# checkpoint " << path << "\n";
        }
        std::cout << "# seed " << cfg.seed << " accuracy " << res.test_metrics.accuracy
                  << " miou " << res.test_metrics.miou << " ceiling " << res.ceiling << "\n";
    }

    const double acc_mean = acc_sum / double(repeat), miou_mean = miou_sum / double(repeat);
    double acc_dev = 0.0, miou_dev = 0.0;
    for (int r = 0; r < repeat; ++r) {
        acc_dev += std::abs(accs[size_t(r)] - acc_mean);
        miou_dev += std::abs(mious[size_t(r)] - miou_mean);
    }
    metrics["runs"] = runs;
    metrics["mean"] = {{"accuracy", acc_mean}, {"miou", miou_mean}};
    metrics["deviation"] =
        {{"accuracy", acc_dev / double(repeat)}, {"miou", miou_dev / double(repeat)}};
    emit_metrics(metrics, metrics_path);
    return kExitOk;
}

int cmd_train(const SharedFlags& fl, int repeat, const std::string& metrics_path) {
    const RunConfig cfg = resolve_config(fl);
    print_resolved(cfg);
    if (repeat < 1) throw InvalidInputError("--repeat must be >= 1");
    std::string mpath = metrics_path;
    if (mpath.empty() && !fl.out.empty()) mpath = fl.out + ".metrics.json";
    if (cfg.precision == 32) return train_with<float>(cfg, fl, repeat, mpath);
    return train_with<double>(cfg, fl, repeat, mpath);
}

template <class Scalar>
int eval_with(const RunConfig& cfg, const std::string& ckpt_path, const std::string& out_path) {
    const Checkpoint<Scalar> ckpt = load_checkpoint<Scalar>(ckpt_path);
    UNet<Scalar> model(cfg.unet_config(), cfg.seed);
    load_into_model(model, ckpt);

    SynthTask test_task = cfg.synth_task();
    test_task.points = cfg.test_points;
    test_task.seed = test_seed_of(cfg.seed);
    const PointCloud test_cloud = test_task.generate();
    const GridSpec spec = cfg.grid_spec();

    const std::vector<int> pred = evaluate_model(model, test_cloud, spec);
    const SegMetrics m = miou(std::span<const int>(pred), std::span<const int>(test_cloud.labels),
                              cfg.synth_task().class_count());
    const double ceiling = majority_ceiling(test_cloud, spec);
    const PaddedFeatureStats ps = padded_feature_stats(model.last_output_tensor());

    json metrics = metrics_skeleton("eval", cfg);
    metrics["checkpoint"] = ckpt_path;
    metrics["runs"] = json::array({run_entry(cfg.seed, m, ceiling, 0.0, ps)});
    metrics["mean"] = {{"accuracy", m.accuracy}, {"miou", m.miou}};
    metrics["deviation"] = {{"accuracy", 0.0}, {"miou", 0.0}};
    if (cfg.interp == "nearest") {
        // nearest interpolation is per-voxel constant, so the majority ceiling
        // bounds its accuracy; a violation means the engine is broken
        metrics["nearest_bound_ok"] = m.accuracy <= ceiling;
        if (m.accuracy > ceiling)
            throw NumericalError("eval: nearest-mode accuracy exceeds the majority ceiling");
    }
    emit_metrics(metrics, out_path);
    return kExitOk;
}

int cmd_eval(const SharedFlags& fl, const std::string& ckpt_path) {
    if (ckpt_path.empty()) throw InvalidInputError("eval: --checkpoint is required");
    const int precision = checkpoint_precision(ckpt_path);

    // the checkpoint's embedded config is authoritative; --set can override
    RunConfig cfg;
    {
        std::string text;
        if (precision == 32)
            text = load_checkpoint<float>(ckpt_path).config_text;
        else
            text = load_checkpoint<double>(ckpt_path).config_text;
        std::istringstream is(text);
        apply_config_text(cfg, is, ckpt_path + " (embedded config)");
    }
    for (const std::string& kv : fl.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw InvalidInputError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.precision = precision;
    cfg.validate();
    print_resolved(cfg);

    if (precision == 32) return eval_with<float>(cfg, ckpt_path, fl.out);
    return eval_with<double>(cfg, ckpt_path, fl.out);
}

//============================================================================
// gradcheck: finite-difference checks over every layer and a 2-level U-Net
//============================================================================

SparseTensor<double> gradcheck_scaffold(int voxels, std::uint64_t seed, int channels,
                                        int padded_every = 0) {
    Rng rng(seed);
    std::vector<VoxelKey> keys;
    for (int i = 0; i < 4 && int(keys.size()) < voxels; ++i)
        for (int j = 0; j < 4 && int(keys.size()) < voxels; ++j)
            for (int k = 0; k < 4 && int(keys.size()) < voxels; ++k) keys.push_back({i, j, k, 0});
    Matrix<double> feats(int(keys.size()), channels);
    for (auto& v : feats.data) v = rng.normal();
    std::vector<VoxelOrigin> origin(keys.size(), VoxelOrigin::Original);
    if (padded_every > 0)
        for (std::size_t r = 0; r < origin.size(); r += std::size_t(padded_every))
            origin[r] = VoxelOrigin::Padded;
    return make_sparse_tensor<double>(GridSpec({0, 0, 0}, 1.0, 0), std::move(keys),
                                      std::move(feats), std::move(origin));
}

double sum_squares(const Matrix<double>& m) {
    double s = 0.0;
    for (double v : m.data) s += 0.5 * v * v;
    return s;
}

Matrix<double> grad_of_sum_squares(const Matrix<double>& m) { return m; }

struct LayerCheck {
    std::string name;
    GradCheckReport report;
};

template <class Forward>
LayerCheck check_layer(const std::string& name, std::vector<Parameter<double>*> params,
                       Forward forward, bool inject_fault) {
    auto compute = [&]() {
        for (auto* p : params) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
        forward(true);
        if (inject_fault && !params.empty() && !params[0]->grad.data.empty())
            params[0]->grad.data[0] *= 1.5;
    };
    auto loss = [&]() { return forward(false); };
    GradCheckOptions opt;
    opt.samples_per_param = 12;
    LayerCheck res;
    res.name = name;
    res.report = grad_check(params, compute, loss, opt);
    return res;
}

int cmd_gradcheck(double tolerance, bool inject_fault, const std::string& out_path) {
    std::vector<LayerCheck> checks;
    Rng rng(11);

    {
        RowLinear<double> lin("linear", 3, 4, rng);
        auto x = gradcheck_scaffold(6, 21, 3);
        std::vector<Parameter<double>*> params;
        lin.collect(params);
        checks.push_back(check_layer(
            "linear", params,
            [&](bool backward) {
                auto y = lin.forward(x.features);
                if (backward) lin.backward(grad_of_sum_squares(y));
                return sum_squares(y);
            },
            inject_fault));
    }
    {
        auto x = gradcheck_scaffold(10, 22, 3);
        BatchNorm<double> norm("norm", 3, true);
        norm.update_running = false;
        for (auto& g : norm.gamma.value.data) g = 0.5 + rng.uniform01();
        std::vector<Parameter<double>*> params;
        norm.collect(params);
        checks.push_back(check_layer(
            "batchnorm", params,
            [&](bool backward) {
                auto y = norm.forward(x.features, x, true);
                if (backward) norm.backward(grad_of_sum_squares(y));
                return sum_squares(y);
            },
            false));
    }
    {
        auto x = gradcheck_scaffold(12, 23, 3, 3);  // every 3rd row padded
        BatchNorm<double> norm("norm.masked", 3, false);
        norm.update_running = false;
        std::vector<Parameter<double>*> params;
        norm.collect(params);
        checks.push_back(check_layer(
            "batchnorm_masked", params,
            [&](bool backward) {
                auto y = norm.forward(x.features, x, true);
                if (backward) norm.backward(grad_of_sum_squares(y));
                return sum_squares(y);
            },
            false));
    }
    {
        auto x = gradcheck_scaffold(14, 24, 3);
        SubmanifoldConv<double> conv("conv", 3, 4, rng);
        std::vector<Parameter<double>*> params;
        conv.collect(params);
        checks.push_back(check_layer(
            "submanifold_conv", params,
            [&](bool backward) {
                auto y = conv.forward(x.features, x, true);
                if (backward) conv.backward(grad_of_sum_squares(y));
                return sum_squares(y);
            },
            false));
    }
    {
        auto fine = gradcheck_scaffold(16, 25, 3);
        std::vector<VoxelKey> ckeys;
        std::vector<VoxelOrigin> corigin;
        downsample_out_keys(fine, ckeys, corigin);
        const int coarse_rows = int(ckeys.size());
        auto coarse = make_sparse_tensor<double>(fine.spec.coarser(), std::move(ckeys),
                                                 Matrix<double>(coarse_rows, 0),
                                                 std::move(corigin));
        DownConv<double> down("down", 3, 4, rng);
        UpConv<double> up("up", 4, 3, rng);
        std::vector<Parameter<double>*> params;
        down.collect(params);
        up.collect(params);
        checks.push_back(check_layer(
            "down_up", params,
            [&](bool backward) {
                auto mid = down.forward(fine.features, fine, coarse);
                auto y = up.forward(mid, coarse, fine);
                if (backward) down.backward(up.backward(grad_of_sum_squares(y)));
                return sum_squares(y);
            },
            false));
    }
    {
        auto x = gradcheck_scaffold(10, 26, 2);
        ResBlock<double> block("res", 2, 3, rng);
        block.norm1.update_running = false;
        block.norm2.update_running = false;
        if (block.proj_norm) block.proj_norm->update_running = false;
        std::vector<Parameter<double>*> params;
        block.collect(params);
        checks.push_back(check_layer(
            "resblock", params,
            [&](bool backward) {
                auto y = block.forward(x.features, x, true);
                if (backward) block.backward(grad_of_sum_squares(y));
                return sum_squares(y);
            },
            false));
    }
    {
        auto x = gradcheck_scaffold(8, 27, 3);
        PointHead<double> head("head", 3, 6, 2, rng);
        std::vector<Parameter<double>*> params;
        head.collect(params);
        checks.push_back(check_layer(
            "point_head", params,
            [&](bool backward) {
                auto y = head.forward(x.features);
                if (backward) head.backward(grad_of_sum_squares(y));
                return sum_squares(y);
            },
            false));
    }
    {
        Rng crng(31);
        PointCloud cloud;
        cloud.features = Matrix<double>(30, 3);
        for (int i = 0; i < 30; ++i) {
            Point3 p{crng.uniform01() * 4.0, crng.uniform01() * 4.0, crng.uniform01() * 4.0};
            cloud.points.push_back(p);
            cloud.labels.push_back(i % 2);
            cloud.features(i, 0) = p.x;
            cloud.features(i, 1) = p.y;
            cloud.features(i, 2) = p.z;
        }
        std::vector<PointCloud> clouds = {cloud};
        UNetConfig ucfg;
        ucfg.levels = 2;
        ucfg.in_channels = 4;
        ucfg.channels = {4, 6};
        ucfg.resblocks = {1, 1};
        ucfg.head_hidden = 8;
        ucfg.classes = 2;
        UNet<double> net(ucfg, 33);
        net.set_update_running(false);
        const GridSpec spec({0, 0, 0}, 1.0, 0);
        auto params = net.parameters();
        auto compute = [&]() {
            net.zero_grad();
            auto logits = net.forward(clouds, spec, true);
            net.backward(cross_entropy(logits, std::span<const int>(cloud.labels)).grad);
        };
        auto loss = [&]() {
            auto logits = net.forward(clouds, spec, true);
            return cross_entropy(logits, std::span<const int>(cloud.labels)).loss;
        };
        GradCheckOptions opt;
        opt.samples_per_param = 4;
        LayerCheck res;
        res.name = "unet2";
        res.report = grad_check(params, compute, loss, opt);
        checks.push_back(std::move(res));
    }

    bool all_pass = true;
    json layers = json::array();
    for (const LayerCheck& c : checks) {
        const bool ok = c.report.pass(tolerance);
        all_pass = all_pass && ok;
        std::printf("[%s] %-18s checked=%-4d max_rel_err=%.3e worst=%s\n", ok ? "PASS" : "FAIL",
                    c.name.c_str(), c.report.checked, c.report.max_rel_err,
                    c.report.worst.param.c_str());
        json j;
        j["name"] = c.name;
        j["checked"] = c.report.checked;
        j["max_rel_err"] = c.report.max_rel_err;
        j["pass"] = ok;
        layers.push_back(j);
    }
    std::printf("[%s] gradcheck tolerance=%.1e\n", all_pass ? "PASS" : "FAIL", tolerance);

    if (!out_path.empty()) {
        json out;
        out["format"] = "voxpad-gradcheck-v1";
        out["tolerance"] = tolerance;
        out["pass"] = all_pass;
        out["layers"] = layers;
        write_text(out_path, out.dump(2) + "\n");
    }
    return all_pass ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"voxpad: sparse-voxel CNN engine with interpolation-aware padding"};
    app.require_subcommand(1);

    StatsArgs stats;
    auto* cmd_stats_p = app.add_subcommand("stats", "padding occupancy statistics as CSV");
    add_shared_flags(cmd_stats_p, stats.fl);
    cmd_stats_p->add_option("--input", stats.input, "point cloud text file (default: synth task)");
    cmd_stats_p->add_option("--voxel-sizes", stats.voxel_sizes, "comma-separated voxel sizes")
        ->delimiter(',');
    cmd_stats_p->add_option("--schemes", stats.schemes, "comma-separated padding schemes")
        ->delimiter(',');

    SharedFlags synth_fl;
    auto* cmd_synth_p = app.add_subcommand("synth", "generate a synthetic dataset");
    add_shared_flags(cmd_synth_p, synth_fl);

    SharedFlags train_fl;
    int repeat = 1;
    std::string metrics_path;
    auto* cmd_train_p = app.add_subcommand("train", "train a model; writes checkpoint + metrics");
    add_shared_flags(cmd_train_p, train_fl);
    cmd_train_p->add_option("--repeat", repeat, "seeds seed..seed+k-1; metrics report mean and deviation");
    cmd_train_p->add_option("--metrics", metrics_path, "metrics JSON path (default <out>.metrics.json)");

    SharedFlags eval_fl;
    std::string ckpt_path;
    auto* cmd_eval_p = app.add_subcommand("eval", "evaluate a checkpoint on its task's test split");
    add_shared_flags(cmd_eval_p, eval_fl);
    cmd_eval_p->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();

    SharedFlags gc_fl;
    double tolerance = 1e-4;
    bool inject_fault = false;
    auto* cmd_gc_p = app.add_subcommand("gradcheck", "finite-difference gradient checks (64-bit)");
    add_shared_flags(cmd_gc_p, gc_fl);
    cmd_gc_p->add_option("--tolerance", tolerance, "max relative error allowed");
    cmd_gc_p->add_flag("--inject-fault", inject_fault, "corrupt one gradient to prove the check bites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (cmd_stats_p->parsed()) return cmd_stats(stats);
        if (cmd_synth_p->parsed()) return cmd_synth(synth_fl);
        if (cmd_train_p->parsed()) return cmd_train(train_fl, repeat, metrics_path);
        if (cmd_eval_p->parsed()) return cmd_eval(eval_fl, ckpt_path);
        if (cmd_gc_p->parsed()) return cmd_gradcheck(tolerance, inject_fault, gc_fl.out);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
