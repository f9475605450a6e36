#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "vivat/cli/config.hpp"
#include "vivat/diagnostics/ab.hpp"
#include "vivat/diagnostics/detectors.hpp"
#include "vivat/diagnostics/probe.hpp"
#include "vivat/io/png.hpp"
#include "vivat/metrics.hpp"
#include "vivat/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace vivat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
    std::string config_path;
    std::string preset;
    std::vector<std::string> overrides;
    int64_t seed = -1;
    std::string run_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (TOML-style)");
    cmd->add_option("--preset", args.preset, "preset: baseline or vivat");
    cmd->add_option("--set", args.overrides, "override, e.g. --set train.max_steps=100")
        ->take_all();
    cmd->add_option("--seed", args.seed, "override train.seed");
    cmd->add_option("--run-dir", args.run_dir, "output directory for this run");
}

RunConfig build_run_config(const CommonArgs& args) {
    KvConfig kv;
    std::string origin = "defaults";
    if (!args.preset.empty()) {
        kv = preset_config(args.preset);
        origin = "preset:" + args.preset;
    }
    if (!args.config_path.empty()) {
        KvConfig file = KvConfig::parse_file(args.config_path);
        for (const auto& [k, v] : file.entries()) kv.set(k, v);
        origin = args.config_path;
    }
    for (const auto& ov : args.overrides) kv.apply_override(ov);
    if (args.seed >= 0) kv.set("train.seed", std::to_string(args.seed));
    RunConfig rc = run_config_from(kv);
    rc.origin = origin;
    rc.overrides = args.overrides;
    return rc;
}

std::string default_run_root() {
    const char* env = std::getenv("VIVAT_RUN_ROOT");
    return env && *env ? env : "runs";
}

fs::path prepare_run_dir(const CommonArgs& args, const RunConfig& rc,
                         const std::string& command) {
    fs::path dir;
    if (!args.run_dir.empty()) {
        dir = args.run_dir;
    } else {
        std::string stem = rc.origin;
        auto slash = stem.find_last_of("/\\");
        if (slash != std::string::npos) stem = stem.substr(slash + 1);
        auto dot = stem.find_last_of('.');
        if (dot != std::string::npos) stem = stem.substr(0, dot);
        auto colon = stem.find(':');
        if (colon != std::string::npos) stem[colon] = '-';
        std::string base = command + "-" + stem + "-seed" + std::to_string(rc.train.seed);
        dir = fs::path(default_run_root()) / base;
        int suffix = 1;
        while (fs::exists(dir))
            dir = fs::path(default_run_root()) / (base + "-" + std::to_string(suffix++));
    }
    fs::create_directories(dir);
    std::ofstream cfg(dir / "config.toml");
    if (!cfg) throw IoError("cannot write config copy under " + dir.string());
    cfg << rc.dump_toml();
    return dir;
}

template <class T>
void run_training_loop(TrainState<T>& state, const Dataset& data, const fs::path& run_dir,
                       int64_t max_steps) {
    std::ofstream metrics(run_dir / "metrics.jsonl", std::ios::app);
    if (!metrics) throw IoError("cannot open metrics.jsonl under " + run_dir.string());
    while (state.step < max_steps) {
        TensorF batch = data.batch(state.step, state.cfg.batch_size);
        StepResult r = train_step(state, batch.template cast<T>());
        write_metrics_line(metrics, state.step - 1, state.cfg.phase, r);
        if (state.cfg.checkpoint_every > 0 && state.step % state.cfg.checkpoint_every == 0)
            save_train_state(
                (run_dir / ("checkpoint_" + std::to_string(state.step) + ".vvc")).string(),
                state);
    }
    save_train_state((run_dir / "checkpoint_final.vvc").string(), state);
    VAEModel<T> ema = state.ema_model();
    save_model((run_dir / "model_ema.vvc").string(), ema);
}

int cmd_train(const CommonArgs& args) {
    RunConfig rc = build_run_config(args);
    fs::path run_dir = prepare_run_dir(args, rc, "train");
    Dataset data(rc.data, rc.preprocess);
    if (rc.train.precision == Precision::fp64) {
        TrainState<double> state(rc.model, rc.train);
        run_training_loop(state, data, run_dir, rc.train.max_steps);
        std::cout << "run dir: " << run_dir.string() << "\n";
        std::cout << "final recon (smoothed): " << state.recon_smooth << "\n";
    } else {
        TrainState<float> state(rc.model, rc.train);
        run_training_loop(state, data, run_dir, rc.train.max_steps);
        std::cout << "run dir: " << run_dir.string() << "\n";
        std::cout << "final recon (smoothed): " << state.recon_smooth << "\n";
    }
    return kExitOk;
}

template <class T>
int finetune_impl(const Checkpoint& ckpt, const std::string& checkpoint,
                  const CommonArgs& args) {
    TrainState<T> state = load_train_state_from<T>(ckpt);
    for (const auto& ov : args.overrides) {
        KvConfig kv;
        kv.apply_override(ov);
        if (kv.has("train.max_steps"))
            state.cfg.max_steps = kv.get_int("train.max_steps", state.cfg.max_steps);
        if (kv.has("train.learning_rate")) {
            state.cfg.learning_rate = kv.get_double("train.learning_rate", 0);
            state.opt_g.set_learning_rate(state.cfg.learning_rate);
        }
    }
    freeze_encoder(state);
    RunConfig rc;
    rc.model = state.model.config();
    rc.train = state.cfg;
    rc.origin = checkpoint;
    rc.overrides = args.overrides;
    fs::path run_dir = prepare_run_dir(args, rc, "finetune");
    RunConfig data_rc = build_run_config(args);
    Dataset data(data_rc.data, data_rc.preprocess);
    run_training_loop(state, data, run_dir, state.cfg.max_steps);
    std::cout << "run dir: " << run_dir.string() << "\n";
    return kExitOk;
}

int cmd_finetune_decoder(const std::string& checkpoint, const CommonArgs& args) {
    Checkpoint ckpt = read_checkpoint(checkpoint);
    if (ckpt.meta.at("dtype").get<std::string>() == "f64")
        return finetune_impl<double>(ckpt, checkpoint, args);
    return finetune_impl<float>(ckpt, checkpoint, args);
}

// largest center window whose sides are multiples of f
Image crop_to_multiple(const Image& img, int f) {
    int h = (img.h / f) * f, w = (img.w / f) * f;
    if (h == 0 || w == 0)
        throw ValidationError("image too small for downscale factor " + std::to_string(f));
    if (h == img.h && w == img.w) return img;
    Image out(1, img.c, h, w);
    int oy = (img.h - h) / 2, ox = (img.w - w) / 2;
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(0, c, y, x) = img.at(0, c, oy + y, ox + x);
    return out;
}

Image hstack(const Image& a, const Image& b) {
    Image out(1, 3, a.h, a.w + b.w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < a.h; ++y) {
            for (int x = 0; x < a.w; ++x) out.at(0, c, y, x) = a.at(0, c, y, x);
            for (int x = 0; x < b.w; ++x) out.at(0, c, y, a.w + x) = b.at(0, c, y, x);
        }
    return out;
}

VAEModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
    std::string kind = ckpt.meta.at("kind").get<std::string>();
    if (ckpt.meta.at("dtype").get<std::string>() != "f32")
        throw VersionError("this command expects an fp32 checkpoint");
    if (kind == "model") return load_model_from<float>(ckpt);
    TrainState<float> state = load_train_state_from<float>(ckpt);
    return state.ema_model();  // evaluation always uses the EMA weights
}

int cmd_reconstruct(const std::string& checkpoint, const std::string& input_dir,
                    const std::string& output_dir, bool trace, const CommonArgs& args) {
    RunConfig rc = build_run_config(args);
    VAEModel<float> model = model_from_checkpoint(read_checkpoint(checkpoint));
    fs::create_directories(output_dir);
    int skipped = 0, done = 0;
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(input_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("no PNGs under " + input_dir);
    for (const auto& name : names) {
        Image img;
        try {
            img = read_png((fs::path(input_dir) / name).string());
        } catch (const IoError& e) {
            std::cerr << "warning: skipping " << name << ": " << e.what() << "\n";
            ++skipped;
            continue;
        }
        Image x = crop_to_multiple(img, model.config().downscale_factor);
        auto dist = model.encode(x);
        ActivationTrace trc;
        Image xhat = model.decode(dist.mu, trace ? &trc : nullptr);
        std::string stem = name.substr(0, name.size() - 4);
        write_png_rgb8((fs::path(output_dir) / (stem + ".pair.png")).string(), hstack(x, xhat));
        ArtifactReport rep = diagnose(x, xhat, model.config().downscale_factor, rc.detect);
        nlohmann::json j = rep;
        std::ofstream rf(fs::path(output_dir) / (stem + ".report.json"));
        rf << j.dump(2) << "\n";
        if (trace) {
            for (const auto& [lname, map] : trc.layers) {
                TensorF first(1, 1, map.h, map.w);
                std::copy(map.plane(0, 0), map.plane(0, 0) + (size_t)map.h * map.w,
                          first.v.begin());
                float mx = *std::max_element(first.v.begin(), first.v.end());
                std::string safe = lname;
                for (auto& ch : safe)
                    if (ch == '/' || ch == '.') ch = '_';
                write_png_gray16(
                    (fs::path(output_dir) / (stem + "." + safe + ".norm.png")).string(), first,
                    0.0f, mx > 0 ? mx : 1.0f);
                write_raw_f32(
                    (fs::path(output_dir) / (stem + "." + safe + ".norm.raw")).string(), first);
            }
        }
        ++done;
    }
    std::cout << "reconstructed " << done << " image(s), skipped " << skipped << "\n";
    return skipped > 0 ? kExitIo : kExitOk;
}

int cmd_diagnose(const std::string& pairs_dir, const std::string& out_path,
                 const CommonArgs& args) {
    RunConfig rc = build_run_config(args);
    nlohmann::json out = nlohmann::json::array();
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(pairs_dir)) {
        std::string n = e.path().filename().string();
        if (n.size() > 10 && n.substr(n.size() - 10) == ".recon.png")
            names.push_back(n.substr(0, n.size() - 10));
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw IoError("no *.recon.png pairs found under " + pairs_dir);
    for (const auto& stem : names) {
        Image x = read_png((fs::path(pairs_dir) / (stem + ".png")).string());
        Image y = read_png((fs::path(pairs_dir) / (stem + ".recon.png")).string());
        ArtifactReport rep = diagnose(x, y, rc.model.downscale_factor, rc.detect);
        nlohmann::json j = rep;
        j["name"] = stem;
        out.push_back(j);
    }
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot write " + out_path);
    f << out.dump(2) << "\n";
    std::cout << "diagnosed " << names.size() << " pair(s) -> " << out_path << "\n";
    return kExitOk;
}

struct VaeReconstructor final : Reconstructor {
    VAEModel<float>& model;
    explicit VaeReconstructor(VAEModel<float>& m) : model(m) {}
    Image reconstruct(const Image& x) override {
        auto dist = model.encode(x);
        return model.decode(dist.mu);
    }
    std::string id() const override { return "vae-ema"; }
};

int cmd_metrics(const std::string& checkpoint, const std::string& out_path,
                const std::string& csv_path, const CommonArgs& args) {
    RunConfig rc = build_run_config(args);
    VAEModel<float> model = model_from_checkpoint(read_checkpoint(checkpoint));
    Dataset data(rc.data, rc.preprocess);
    VaeReconstructor recon(model);
    MetricReport rep = evaluate(recon, data, EvalSpec{});
    nlohmann::json j = rep;
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot write " + out_path);
    f << j.dump(2) << "\n";
    if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw IoError("cannot write " + csv_path);
        csv << "path,psnr,ssim\n";
        for (const auto& row : rep.rows)
            csv << row.name << "," << row.psnr << "," << row.ssim << "\n";
    }
    std::cout << "psnr " << rep.psnr_mean << " dB, ssim " << rep.ssim_mean << " over "
              << rep.count << " image(s) -> " << out_path << "\n";
    return kExitOk;
}

int cmd_ab(const std::string& config_a, const std::string& config_b, int64_t steps,
           int eval_images, const std::string& out_path, const CommonArgs& args) {
    CommonArgs a = args;
    a.config_path = config_a;
    CommonArgs b = args;
    b.config_path = config_b;
    RunConfig ra = build_run_config(a);
    RunConfig rb = build_run_config(b);
    nlohmann::json da{{"kind", static_cast<int>(ra.data.kind)},
                      {"root", ra.data.root},
                      {"count", ra.data.count},
                      {"seed", ra.data.shuffle_seed},
                      {"crop", ra.preprocess.crop_size}};
    nlohmann::json db{{"kind", static_cast<int>(rb.data.kind)},
                      {"root", rb.data.root},
                      {"count", rb.data.count},
                      {"seed", rb.data.shuffle_seed},
                      {"crop", rb.preprocess.crop_size}};
    if (da != db) throw ValidationError("ab: the two configs use different eval datasets");
    Dataset data(ra.data, ra.preprocess);
    AbSpec spec;
    spec.steps = steps >= 0 ? steps : ra.train.max_steps;
    spec.eval_images = eval_images;
    spec.downscale_f = ra.model.downscale_factor;
    spec.thresholds = ra.detect;
    spec.probe_size = std::max(16, 4 * ra.model.downscale_factor);
    ComparisonReport rep = ab_compare<float>(ra.model, ra.train, rb.model, rb.train, data, spec);
    nlohmann::json j = rep;
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot write " + out_path);
    f << j.dump(2) << "\n";
    std::cout << "ab report -> " << out_path << "\n";
    for (auto& [k, v] : rep.deltas.items()) std::cout << "  delta " << k << " = " << v << "\n";
    return kExitOk;
}

int cmd_probe(const CommonArgs& args, const std::string& checkpoint, int size) {
    VAEModel<float> model = [&] {
        if (!checkpoint.empty()) return model_from_checkpoint(read_checkpoint(checkpoint));
        RunConfig rc = build_run_config(args);
        return VAEModel<float>(rc.model, rc.train.seed);
    }();
    auto stages = constant_input_probe(model, size, 0.5f);
    std::printf("%-24s %16s %16s\n", "stage", "max rel dev", "border ratio");
    for (const auto& st : stages)
        std::printf("%-24s %16.3e %16.4f\n", st.name.c_str(), st.max_rel_deviation,
                    st.border_ratio);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale KL-VAE training laboratory"};
    app.require_subcommand(1);

    CommonArgs targs, ftargs, rargs, dargs, margs, aargs, pargs;
    std::string ft_checkpoint, r_checkpoint, r_input, r_output, d_pairs, m_checkpoint;
    std::string d_out = "diagnostics.json", m_out = "metrics.json", ab_out = "ab_report.json";
    std::string m_csv;
    std::string ab_config_a, ab_config_b, p_checkpoint;
    bool r_trace = false;
    int64_t ab_steps = -1;
    int ab_eval = 16, p_size = 64;

    auto* train = app.add_subcommand("train", "train a VAE per config");
    add_common(train, targs);

    auto* ft = app.add_subcommand("finetune-decoder",
                                  "resume from a checkpoint with the encoder frozen");
    ft->add_option("checkpoint", ft_checkpoint, "train-state checkpoint")->required();
    add_common(ft, ftargs);

    auto* rec = app.add_subcommand("reconstruct", "write side-by-side reconstructions");
    rec->add_option("checkpoint", r_checkpoint)->required();
    rec->add_option("input", r_input, "directory of PNGs")->required();
    rec->add_option("output", r_output, "output directory")->required();
    rec->add_flag("--trace", r_trace, "also write activation-norm heatmaps");
    add_common(rec, rargs);

    auto* diag = app.add_subcommand("diagnose", "artifact reports for image/recon pairs");
    diag->add_option("pairs", d_pairs, "directory of NAME.png + NAME.recon.png")->required();
    diag->add_option("--out", d_out, "output JSON path");
    add_common(diag, dargs);

    auto* met = app.add_subcommand("metrics", "PSNR/SSIM evaluation of a checkpoint");
    met->add_option("checkpoint", m_checkpoint)->required();
    met->add_option("--out", m_out, "output JSON path");
    met->add_option("--csv", m_csv, "optional per-image CSV (path, psnr, ssim)");
    add_common(met, margs);

    auto* ab = app.add_subcommand("ab", "train and compare two config variants");
    ab->add_option("config_a", ab_config_a)->required();
    ab->add_option("config_b", ab_config_b)->required();
    ab->add_option("--steps", ab_steps, "training steps per variant");
    ab->add_option("--eval-images", ab_eval);
    ab->add_option("--out", ab_out, "output JSON path");
    add_common(ab, aargs);

    auto* probe = app.add_subcommand("probe", "constant-input activation uniformity probe");
    probe->add_option("--checkpoint", p_checkpoint);
    probe->add_option("--size", p_size, "probe image size");
    add_common(probe, pargs);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(targs);
        if (ft->parsed()) return cmd_finetune_decoder(ft_checkpoint, ftargs);
        if (rec->parsed())
            return cmd_reconstruct(r_checkpoint, r_input, r_output, r_trace, rargs);
        if (diag->parsed()) return cmd_diagnose(d_pairs, d_out, dargs);
        if (met->parsed()) return cmd_metrics(m_checkpoint, m_out, m_csv, margs);
        if (ab->parsed())
            return cmd_ab(ab_config_a, ab_config_b, ab_steps, ab_eval, ab_out, aargs);
        if (probe->parsed()) return cmd_probe(pargs, p_checkpoint, p_size);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
