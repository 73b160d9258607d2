// Command-line front end: data generation, schedule inspection, verification
// oracles, two-stage training, prediction, evaluation, and CSV curve dumps.
// Exit codes: 0 ok, 1 verification/metric failure, 2 usage error, 3 I/O error.

#include "noniso/metrics.hpp"
#include "noniso/motion_io.hpp"
#include "noniso/pipeline.hpp"
#include "noniso/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace noniso;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

std::uint64_t default_seed() {
    if (const char* env = std::getenv("NONISO_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return v;
        throw ValidationError("NONISO_SEED is not a valid integer");
    }
    return 1;
}

bool looks_like_io_error(const std::string& msg) {
    return msg.find("cannot open") != std::string::npos ||
           msg.find("cannot write") != std::string::npos ||
           msg.find("write failure") != std::string::npos ||
           msg.find("truncated") != std::string::npos;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write " + path);
    out << text;
    require(out.good(), "write failure on " + path);
}

TrainConfig config_from_flag(const std::string& config_path, std::uint64_t seed, bool seed_set) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path);
    if (seed_set || config_path.empty()) cfg.seed = seed;
    return cfg;
}

std::string pred_file(const std::string& dir, size_t idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pred_%05zu.nipr", idx);
    return (fs::path(dir) / buf).string();
}

std::vector<double> parse_thresholds(const std::string& text) {
    // "start:stop:step" or comma-separated values.
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double start, stop, step;
        if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0)
            throw ValidationError("bad threshold range: " + text);
        for (double v = start; v <= stop + 1e-12; v += step) out.push_back(v);
    } else {
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    }
    require(!out.empty() && std::is_sorted(out.begin(), out.end()),
            "thresholds must be ascending and non-empty");
    return out;
}

struct LoadedModel {
    TrainConfig cfg;
    Dataset data;
    AutoencoderBundle ae;
    DenoiserBundle diff;
};

LoadedModel load_model(const std::string& config_path, const std::string& ae_stem,
                       const std::string& diff_stem, std::uint64_t seed, bool seed_set) {
    LoadedModel m{config_from_flag(config_path, seed, seed_set), {}, {}, {}};
    Rng rng(m.cfg.seed);
    m.data = make_dataset(m.cfg.dataset, rng);
    m.ae = load_autoencoder(ae_stem, m.cfg);
    m.diff = load_denoiser(diff_stem, m.cfg, m.data.skeleton);
    return m;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"nonisotropic diffusion on kinematic chains"};
    app.require_subcommand(1);

    std::uint64_t seed = default_seed();
    bool seed_set = false;
    app.add_flag_callback("--version", [] {
        std::cout << "noniso 1.0\n";
        std::exit(kExitOk);
    });

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic chain dataset");
    std::string gen_config, gen_out = "dataset";
    gen->add_option("--config", gen_config, "train/dataset config JSON");
    gen->add_option("--out", gen_out, "output directory")->capture_default_str();
    gen->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- schedule ----
    auto* sched = app.add_subcommand("schedule", "precompute and dump the noise schedule");
    std::string sched_config, sched_out = "schedule.csv", sched_kind = "blend";
    int sched_steps = 10;
    int sched_joints = 7;
    std::string sched_basis = "adjacency", sched_norm = "spectral";
    double sched_eta = 0.9;
    bool sched_validate_only = false;
    sched->add_option("--config", sched_config, "train config JSON (overrides other flags)");
    sched->add_option("--out", sched_out, "CSV output path")->capture_default_str();
    sched->add_option("--steps", sched_steps, "diffusion steps T")->capture_default_str();
    sched->add_option("--kind", sched_kind, "blend|pure_noniso|pure_iso|discarded")
        ->capture_default_str();
    sched->add_option("--joints", sched_joints, "chain joint count")->capture_default_str();
    sched->add_option("--basis", sched_basis, "adjacency|closure|masked_closure")
        ->capture_default_str();
    sched->add_option("--norm", sched_norm, "spectral|frobenius")->capture_default_str();
    sched->add_option("--eta", sched_eta, "closure decay")->capture_default_str();
    sched->add_flag("--validate-only", sched_validate_only, "skip the CSV dump");
    sched->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- verify ----
    auto* ver = app.add_subcommand("verify", "run the mathematical oracle suites");
    std::string ver_suite = "all", ver_out;
    int ver_samples = 200000;
    double ver_tol = -1.0;
    int ver_threads = 1;
    ver->add_option("--suite", ver_suite, "forward|posterior|schedule|gradients|metrics|all")
        ->capture_default_str();
    ver->add_option("--samples", ver_samples, "Monte-Carlo sample count")->capture_default_str();
    ver->add_option("--tol", ver_tol, "override every suite tolerance");
    ver->add_option("--out", ver_out, "write the JSON report here (default stdout)");
    ver->add_option("--threads", ver_threads, "unused; accepted for interface uniformity");
    ver->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- train-ae ----
    auto* tae = app.add_subcommand("train-ae", "train the motion autoencoder");
    std::string tae_config, tae_out = "run";
    tae->add_option("--config", tae_config, "train config JSON");
    tae->add_option("--out", tae_out, "run directory")->capture_default_str();
    tae->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- train-diff ----
    auto* tdf = app.add_subcommand("train-diff", "train the latent denoiser");
    std::string tdf_config, tdf_out = "run", tdf_ae;
    tdf->add_option("--config", tdf_config, "train config JSON");
    tdf->add_option("--ae", tdf_ae, "autoencoder checkpoint stem (from train-ae)")->required();
    tdf->add_option("--out", tdf_out, "run directory")->capture_default_str();
    tdf->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- predict ----
    auto* prd = app.add_subcommand("predict", "sample futures for observations");
    std::string prd_config, prd_ae, prd_diff, prd_out = "preds", prd_past;
    int prd_n = 20, prd_segment = -1, prd_threads = 1;
    prd->add_option("--config", prd_config, "train config JSON");
    prd->add_option("--ae", prd_ae, "autoencoder checkpoint stem")->required();
    prd->add_option("--diff", prd_diff, "denoiser checkpoint stem")->required();
    prd->add_option("--past", prd_past, "NIMO observation file (otherwise test segments)");
    prd->add_option("--segment", prd_segment, "test segment index; -1 = all")
        ->capture_default_str();
    prd->add_option("--n", prd_n, "samples per observation")->capture_default_str();
    prd->add_option("--out", prd_out, "output file (single) or directory (all)")
        ->capture_default_str();
    prd->add_option("--threads", prd_threads, "rollout parallelism")->capture_default_str();
    prd->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- evaluate ----
    auto* evl = app.add_subcommand("evaluate", "compute the metric suite for predictions");
    std::string evl_config, evl_preds, evl_out = "eval";
    double evl_delta = 0.5;
    int evl_threads = 1;
    bool evl_per_segment = false;
    evl->add_option("--config", evl_config, "train config JSON");
    evl->add_option("--preds-dir", evl_preds, "directory of pred_NNNNN.nipr files")->required();
    evl->add_option("--delta", evl_delta, "MMGT last-frame threshold")->capture_default_str();
    evl->add_option("--out", evl_out, "output directory")->capture_default_str();
    evl->add_flag("--per-segment", evl_per_segment, "also write per_segment.csv");
    evl->add_option("--threads", evl_threads, "segment parallelism")->capture_default_str();
    evl->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- curves ----
    auto* crv = app.add_subcommand("curves", "validity and delta-APD curves as CSV");
    std::string crv_config, crv_preds, crv_out = "curves";
    std::string crv_thresholds = "0:0.25:0.005";
    int crv_threads = 1;
    crv->add_option("--config", crv_config, "train config JSON");
    crv->add_option("--preds-dir", crv_preds, "directory of pred_NNNNN.nipr files")->required();
    crv->add_option("--thresholds", crv_thresholds, "start:stop:step or comma list")
        ->capture_default_str();
    crv->add_option("--out", crv_out, "output directory")->capture_default_str();
    crv->add_option("--threads", crv_threads, "accepted for interface uniformity");
    crv->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    // ---- demo ----
    auto* demo = app.add_subcommand("demo", "full pipeline: data, training, prediction, metrics");
    std::string demo_config, demo_out = "demo_run";
    int demo_n = 20, demo_threads = 1;
    double demo_delta = 0.5;
    demo->add_option("--config", demo_config, "train config JSON");
    demo->add_option("--out", demo_out, "run directory")->capture_default_str();
    demo->add_option("--n", demo_n, "samples per observation")->capture_default_str();
    demo->add_option("--delta", demo_delta, "MMGT threshold")->capture_default_str();
    demo->add_option("--threads", demo_threads, "prediction/evaluation parallelism")
        ->capture_default_str();
    demo->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });

    CLI11_PARSE(app, argc, argv);

    // ------------------------------------------------------------- gen-data
    if (*gen) {
        TrainConfig cfg = config_from_flag(gen_config, seed, seed_set);
        Rng rng(cfg.seed);
        const Dataset data = make_dataset(cfg.dataset, rng);
        fs::create_directories(gen_out);
        save_train_config(cfg, (fs::path(gen_out) / "config.json").string());
        save_skeleton_json(data.skeleton, (fs::path(gen_out) / "skeleton.json").string());

        PredictionSet pasts, futures;
        for (const Segment& s : data.test.segments) {
            pasts.push_back(s.past);
            futures.push_back(s.future);
        }
        save_prediction_set((fs::path(gen_out) / "test_pasts.nipr").string(), pasts);
        save_prediction_set((fs::path(gen_out) / "test_futures.nipr").string(), futures);

        std::ostringstream summary;
        summary << "train segments: " << data.train.segments.size() << "\n"
                << "val segments:   " << data.val.segments.size() << "\n"
                << "test segments:  " << data.test.segments.size() << "\n"
                << "mean velocity:  " << data.test.mean_velocity << "\n";
        write_text_file((fs::path(gen_out) / "summary.txt").string(), summary.str());
        std::cout << summary.str();
        return kExitOk;
    }

    // ------------------------------------------------------------- schedule
    if (*sched) {
        NoiseSchedule s;
        if (!sched_config.empty()) {
            TrainConfig cfg = config_from_flag(sched_config, seed, seed_set);
            Rng rng(cfg.seed);
            const Dataset data = make_dataset(cfg.dataset, rng);
            s = schedule_from_config(cfg, data.skeleton);
        } else {
            std::vector<double> lengths(static_cast<size_t>(sched_joints) - 1, 0.3);
            const Skeleton skel = make_chain_skeleton(sched_joints, lengths);
            const CorrelationModel corr = build_correlation(
                skel, sigma_basis_from_name(sched_basis), sched_eta,
                sched_norm == "frobenius" ? NormKind::frobenius : NormKind::spectral);
            s = build_schedule(corr, cosine_alpha_schedule(sched_steps),
                               gamma_schedule(sched_steps, gamma_kind_from_name(sched_kind)));
        }
        const ValidationReport vr = validate_schedule(s);
        for (const ValidationItem& item : vr.items)
            std::cout << (item.pass ? "pass" : (item.informational ? "info" : "FAIL")) << "  "
                      << item.name << "  max violation " << item.max_violation << "\n";
        for (const std::string& note : vr.notes) std::cout << "note: " << note << "\n";
        if (!sched_validate_only) {
            std::ofstream out(sched_out, std::ios::binary);
            require(out.good(), "cannot write " + sched_out);
            write_schedule_csv(s, out);
            std::cout << "schedule written to " << sched_out << "\n";
        }
        return vr.pass ? kExitOk : kExitFailure;
    }

    // --------------------------------------------------------------- verify
    if (*ver) {
        std::vector<SuiteReport> suites;
        const bool tol_set = ver_tol >= 0.0;
        const bool all = ver_suite == "all";
        if (all || ver_suite == "forward")
            suites.push_back(verify_forward(seed, ver_samples, 3.0, tol_set ? ver_tol : 0.02));
        if (all || ver_suite == "posterior") {
            suites.push_back(verify_posterior(seed, 100, tol_set ? ver_tol : 1e-10));
            suites.push_back(verify_iso_reduction(seed, tol_set ? ver_tol : 1e-12));
        }
        if (all || ver_suite == "schedule")
            suites.push_back(verify_schedule(tol_set ? ver_tol : 1e-12));
        if (all || ver_suite == "gradients")
            suites.push_back(verify_gradients(seed, 20, tol_set ? ver_tol : 1e-5));
        if (all || ver_suite == "metrics")
            suites.push_back(verify_metrics(seed, 40, tol_set ? ver_tol : 1e-10));
        require(!suites.empty(), "unknown suite: " + ver_suite);

        const std::string json = suites_json(suites);
        if (ver_out.empty())
            std::cout << json;
        else
            write_text_file(ver_out, json);
        for (const SuiteReport& s : suites) {
            for (const CheckResult& c : s.checks)
                if (!c.pass)
                    std::cerr << "FAIL " << s.suite << ": " << c.name << " violation "
                              << c.max_violation << " tol " << c.tolerance << "\n";
            std::cerr << (s.pass ? "pass " : "FAIL ") << s.suite << " (" << s.seconds << " s)\n";
        }
        return all_pass(suites) ? kExitOk : kExitFailure;
    }

    // --------------------------------------------------------------- train-ae
    if (*tae) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainConfig cfg = config_from_flag(tae_config, seed, seed_set);
        Rng rng(cfg.seed);
        const Dataset data = make_dataset(cfg.dataset, rng);
        fs::create_directories(tae_out);

        std::ofstream log((fs::path(tae_out) / "train_ae.log").string());
        AutoencoderBundle bundle = train_autoencoder(cfg, data, &log);
        const std::string stem = (fs::path(tae_out) / "ae").string();
        save_autoencoder(stem, bundle);
        save_train_config(cfg, (fs::path(tae_out) / "config.json").string());

        RunManifest manifest;
        manifest.config_json = train_config_json(cfg);
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(manifest.config_json)));
        manifest.content_hash = hash;
        manifest.checkpoints = {stem + ".nitg", stem + ".ema.nitg"};
        manifest.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_text_file((fs::path(tae_out) / "manifest.json").string(), manifest_json(manifest));
        std::cout << "autoencoder trained: " << bundle.param_count << " parameters, final l1 "
                  << bundle.epoch_loss.back() << "\n";
        return kExitOk;
    }

    // -------------------------------------------------------------- train-diff
    if (*tdf) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainConfig cfg = config_from_flag(tdf_config, seed, seed_set);
        Rng rng(cfg.seed);
        const Dataset data = make_dataset(cfg.dataset, rng);
        AutoencoderBundle ae = load_autoencoder(tdf_ae, cfg);
        fs::create_directories(tdf_out);

        std::ofstream log((fs::path(tdf_out) / "train_diff.log").string());
        DenoiserBundle bundle = train_denoiser(cfg, data, ae.encoder_ema, ae.decoder_ema, &log);
        const std::string stem = (fs::path(tdf_out) / "diff").string();
        save_denoiser(stem, bundle);
        save_train_config(cfg, (fs::path(tdf_out) / "config.json").string());

        RunManifest manifest;
        manifest.config_json = train_config_json(cfg);
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(manifest.config_json)));
        manifest.content_hash = hash;
        manifest.checkpoints = {stem + ".nitg", stem + ".ema.nitg"};
        manifest.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_text_file((fs::path(tdf_out) / "manifest.json").string(), manifest_json(manifest));
        std::cout << "denoiser trained: " << bundle.param_count << " parameters, final loss "
                  << bundle.epoch_loss.back() << "\n";
        return kExitOk;
    }

    // ---------------------------------------------------------------- predict
    if (*prd) {
        LoadedModel m = load_model(prd_config, prd_ae, prd_diff, seed, seed_set);
        if (!prd_past.empty()) {
            const Motion past = load_motion(prd_past);
            const PredictionSet preds = predict(m.ae.encoder_ema, m.ae.decoder_ema,
                                                m.diff.net_ema, m.diff.schedule, past, prd_n,
                                                seed, prd_threads);
            save_prediction_set(prd_out, preds);
            std::cout << "wrote " << preds.size() << " futures to " << prd_out << "\n";
        } else if (prd_segment >= 0) {
            require(prd_segment < static_cast<int>(m.data.test.segments.size()),
                    "segment index out of range");
            const PredictionSet preds =
                predict(m.ae.encoder_ema, m.ae.decoder_ema, m.diff.net_ema, m.diff.schedule,
                        m.data.test.segments[prd_segment].past, prd_n,
                        seed + static_cast<std::uint64_t>(prd_segment), prd_threads);
            save_prediction_set(prd_out, preds);
            std::cout << "wrote " << preds.size() << " futures to " << prd_out << "\n";
        } else {
            fs::create_directories(prd_out);
            const std::vector<PredictionSet> all =
                predict_test_split(m.ae.encoder_ema, m.ae.decoder_ema, m.diff.net_ema,
                                   m.diff.schedule, m.data, prd_n, seed, prd_threads);
            for (size_t i = 0; i < all.size(); ++i) save_prediction_set(pred_file(prd_out, i), all[i]);
            std::cout << "wrote " << all.size() << " prediction sets to " << prd_out << "\n";
        }
        return kExitOk;
    }

    // --------------------------------------------------------------- evaluate
    if (*evl) {
        TrainConfig cfg = config_from_flag(evl_config, seed, seed_set);
        Rng rng(cfg.seed);
        const Dataset data = make_dataset(cfg.dataset, rng);

        std::vector<PredictionSet> preds;
        std::vector<std::string> missing;
        for (size_t i = 0; i < data.test.segments.size(); ++i) {
            const std::string path = pred_file(evl_preds, i);
            if (!fs::exists(path)) {
                missing.push_back(path);
                continue;
            }
            preds.push_back(load_prediction_set(path));
        }
        if (!missing.empty()) {
            std::cerr << "missing prediction files for " << missing.size() << " segment(s):\n";
            for (const std::string& p : missing) std::cerr << "  " << p << "\n";
            return kExitUsage;
        }

        const MetricsReport report =
            evaluate_predictions(preds, data.test, data.skeleton, evl_delta, evl_threads);
        fs::create_directories(evl_out);
        write_text_file((fs::path(evl_out) / "metrics.json").string(),
                        metrics_report_json(report));
        if (evl_per_segment) {
            std::ofstream csv((fs::path(evl_out) / "per_segment.csv").string());
            require(csv.good(), "cannot write per_segment.csv");
            write_per_segment_csv(report, csv);
        }
        std::cout << metrics_report_json(report);
        return kExitOk;
    }

    // ----------------------------------------------------------------- curves
    if (*crv) {
        TrainConfig cfg = config_from_flag(crv_config, seed, seed_set);
        Rng rng(cfg.seed);
        const Dataset data = make_dataset(cfg.dataset, rng);
        const std::vector<double> thresholds = parse_thresholds(crv_thresholds);

        std::vector<PredictionSet> preds;
        for (size_t i = 0; i < data.test.segments.size(); ++i) {
            const std::string path = pred_file(crv_preds, i);
            require(fs::exists(path), "missing prediction file " + path);
            preds.push_back(load_prediction_set(path));
        }

        // Validity pooled over all generated motions; delta-APD averaged
        // over segments (APD is defined within a segment's sample set).
        PredictionSet pooled;
        for (const PredictionSet& p : preds) pooled.insert(pooled.end(), p.begin(), p.end());
        const std::vector<double> valid =
            validity_curve(pooled, data.skeleton, thresholds, BoneErrorKind::stretch);

        std::vector<double> dapd(thresholds.size(), 0.0);
        for (const PredictionSet& p : preds) {
            const std::vector<double> one =
                delta_apd(p, data.skeleton, thresholds, BoneErrorKind::jitter);
            for (size_t i = 0; i < one.size(); ++i) dapd[i] += one[i];
        }
        for (double& v : dapd) v /= preds.size();

        fs::create_directories(crv_out);
        {
            std::ofstream out((fs::path(crv_out) / "validity.csv").string());
            require(out.good(), "cannot write validity.csv");
            out << "threshold,valid_fraction\n";
            out.precision(17);
            for (size_t i = 0; i < thresholds.size(); ++i)
                out << thresholds[i] << "," << valid[i] << "\n";
        }
        {
            std::ofstream out((fs::path(crv_out) / "delta_apd.csv").string());
            require(out.good(), "cannot write delta_apd.csv");
            out << "threshold,delta_apd\n";
            out.precision(17);
            for (size_t i = 0; i < thresholds.size(); ++i)
                out << thresholds[i] << "," << dapd[i] << "\n";
        }
        std::cout << "curves written to " << crv_out << "\n";
        return kExitOk;
    }

    // ------------------------------------------------------------------- demo
    if (*demo) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainConfig cfg = config_from_flag(demo_config, seed, seed_set);
        Rng rng(cfg.seed);
        const Dataset data = make_dataset(cfg.dataset, rng);
        fs::create_directories(demo_out);
        save_train_config(cfg, (fs::path(demo_out) / "config.json").string());
        save_skeleton_json(data.skeleton, (fs::path(demo_out) / "skeleton.json").string());

        std::ofstream log((fs::path(demo_out) / "train.log").string());
        AutoencoderBundle ae = train_autoencoder(cfg, data, &log);
        save_autoencoder((fs::path(demo_out) / "ae").string(), ae);
        DenoiserBundle diff = train_denoiser(cfg, data, ae.encoder_ema, ae.decoder_ema, &log);
        save_denoiser((fs::path(demo_out) / "diff").string(), diff);

        const std::string preds_dir = (fs::path(demo_out) / "preds").string();
        fs::create_directories(preds_dir);
        const std::vector<PredictionSet> preds =
            predict_test_split(ae.encoder_ema, ae.decoder_ema, diff.net_ema, diff.schedule, data,
                               demo_n, cfg.seed, demo_threads);
        for (size_t i = 0; i < preds.size(); ++i)
            save_prediction_set(pred_file(preds_dir, i), preds[i]);

        const MetricsReport report =
            evaluate_predictions(preds, data.test, data.skeleton, demo_delta, demo_threads);
        write_text_file((fs::path(demo_out) / "metrics.json").string(),
                        metrics_report_json(report));

        const std::vector<double> thresholds = parse_thresholds("0:0.25:0.005");
        PredictionSet pooled;
        for (const PredictionSet& p : preds) pooled.insert(pooled.end(), p.begin(), p.end());
        const std::vector<double> valid =
            validity_curve(pooled, data.skeleton, thresholds, BoneErrorKind::stretch);
        std::vector<double> dapd(thresholds.size(), 0.0);
        for (const PredictionSet& p : preds) {
            const std::vector<double> one =
                delta_apd(p, data.skeleton, thresholds, BoneErrorKind::jitter);
            for (size_t i = 0; i < one.size(); ++i) dapd[i] += one[i];
        }
        for (double& v : dapd) v /= preds.size();
        {
            std::ofstream out((fs::path(demo_out) / "validity.csv").string());
            out << "threshold,valid_fraction\n";
            out.precision(17);
            for (size_t i = 0; i < thresholds.size(); ++i)
                out << thresholds[i] << "," << valid[i] << "\n";
        }
        {
            std::ofstream out((fs::path(demo_out) / "delta_apd.csv").string());
            out << "threshold,delta_apd\n";
            out.precision(17);
            for (size_t i = 0; i < thresholds.size(); ++i)
                out << thresholds[i] << "," << dapd[i] << "\n";
        }

        RunManifest manifest;
        manifest.config_json = train_config_json(cfg);
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(manifest.config_json)));
        manifest.content_hash = hash;
        manifest.checkpoints = {(fs::path(demo_out) / "ae.nitg").string(),
                                (fs::path(demo_out) / "ae.ema.nitg").string(),
                                (fs::path(demo_out) / "diff.nitg").string(),
                                (fs::path(demo_out) / "diff.ema.nitg").string()};
        manifest.metrics_path = (fs::path(demo_out) / "metrics.json").string();
        manifest.wall_clock_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_text_file((fs::path(demo_out) / "manifest.json").string(), manifest_json(manifest));

        std::cout << metrics_report_json(report);
        std::cout << "demo complete in " << manifest.wall_clock_sec << " s\n";
        return kExitOk;
    }

    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return looks_like_io_error(e.what()) ? kExitIo : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}
