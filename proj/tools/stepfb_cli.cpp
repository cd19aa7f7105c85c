// Command-line driver: quantizer design, single-session tracing, BER sweeps
// and step-size histograms, all emitting CSV. Configuration comes from
// presets, flat `key = value` files and flags, with flags winning.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stepfb/config.hpp"
#include "stepfb/csv.hpp"
#include "stepfb/errors.hpp"
#include "stepfb/fileio.hpp"
#include "stepfb/harness.hpp"

namespace {

using namespace stepfb;

constexpr std::uint64_t kSaltTrace = 4;

struct ConfigKey {
    const char* key;
    const char* flag;
    const char* help;
    std::string value;
    CLI::Option* opt = nullptr;
};

struct CommonArgs {
    std::string preset;
    std::string config_file;
    std::vector<ConfigKey> keys{
        {"n_t", "--n-t", "transmit antennas", {}, nullptr},
        {"n_r", "--n-r", "receive antennas", {}, nullptr},
        {"modulation", "--modulation", "bpsk or qpsk", {}, nullptr},
        {"symbol_power", "--symbol-power", "constellation power P", {}, nullptr},
        {"zeta", "--zeta", "estimate-error thresholds, comma separated", {}, nullptr},
        {"tnr_db", "--tnr-db", "TNR grid in dB: lo:step:hi (inclusive) or a single value", {},
         nullptr},
        {"trials", "--trials", "channel realizations per TNR point", {}, nullptr},
        {"max_iters", "--max-iters", "iteration cap per estimation session", {}, nullptr},
        {"bits", "--bits", "step-size quantizer bits", {}, nullptr},
        {"seed", "--seed", "master seed", {}, nullptr},
        {"interrupt", "--interrupt",
         "1 = interrupt data transmission during estimation, 0 = keep transmitting", {}, nullptr},
        {"block_symbols", "--block-symbols", "data symbols per realization and scheme", {},
         nullptr},
        {"training_factor", "--training-factor", "training length = factor * n_t", {}, nullptr},
        {"training_kind", "--training-kind", "gaussian or pn", {}, nullptr},
        {"h0_init", "--h0-init", "session start estimate: zero or previous", {}, nullptr},
        {"threads", "--threads", "worker threads (0 = all cores)", {}, nullptr},
    };

    void add_to(CLI::App* cmd) {
        cmd->add_option("--preset", preset,
                        "paper situation: bpsk-nt2, bpsk-nt3, qpsk-nt2 or qpsk-nt3");
        cmd->add_option("--config", config_file, "flat key = value config file");
        for (auto& k : keys) k.opt = cmd->add_option(k.flag, k.value, k.help);
    }

    // defaults -> preset -> config file -> explicit flags
    SimConfig build(std::string* out_path) const {
        SimConfig cfg = preset.empty() ? SimConfig{} : preset_config(preset);
        if (!config_file.empty()) load_config_file(config_file, cfg, out_path);
        for (const auto& k : keys)
            if (k.opt && k.opt->count() > 0) apply_config_key(cfg, k.key, k.value);
        cfg.validate();
        return cfg;
    }
};

void validate_output_path(const std::string& path) {
    if (path == "-") return;
    const std::string probe = path + ".tmp";
    std::ofstream f(probe, std::ios::app);
    if (!f) throw IoError("output path not writable: " + path);
    f.close();
    std::remove(probe.c_str());
}

void write_output(const std::string& path, const std::string& content) {
    if (path == "-")
        std::cout << content;
    else
        atomic_write_file(path, content);
}

// progress lines on stderr every few percent; stdout stays machine-clean
ProgressFn stderr_progress(const char* label) {
    auto last = std::make_shared<std::mutex>();
    auto shown = std::make_shared<std::uint64_t>(0);
    std::string tag(label);
    return [=](std::uint64_t done, std::uint64_t total) {
        std::lock_guard<std::mutex> lock(*last);
        const std::uint64_t pct = total ? 100 * done / total : 100;
        if (pct >= *shown + 5 || done == total) {
            *shown = pct;
            std::fprintf(stderr, "%s: %llu/%llu (%llu%%)\n", tag.c_str(),
                         static_cast<unsigned long long>(done),
                         static_cast<unsigned long long>(total),
                         static_cast<unsigned long long>(pct));
        }
    };
}

std::vector<double> load_sample_file(const std::string& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw ParameterError("bad number in sample file " + path);
    return out;
}

int run_design(const CommonArgs& common, const std::string& out_flag, std::uint64_t sessions,
               const std::string& samples_path) {
    std::string cfg_out;
    const SimConfig cfg = common.build(&cfg_out);
    const std::string out = out_flag.empty() ? cfg_out : out_flag;
    if (out.empty()) throw ParameterError("design-quantizer needs --out");
    validate_output_path(out);

    std::vector<double> samples;
    bool synthetic = !samples_path.empty();
    if (synthetic)
        samples = load_sample_file(samples_path);
    else
        samples = collect_step_samples(cfg, sessions);

    StepCodebook cb = design_codebook(samples, cfg.quantizer_bits);
    if (!synthetic) {
        cb.meta.n_t = cfg.n_t;
        cb.meta.zeta = cfg.zeta_list.front();
    }
    write_output(out, codebook_to_text(cb));

    std::ostream& info = out == "-" ? std::cerr : std::cout;
    info << "codebook: bits=" << cb.bits << " samples=" << cb.meta.sample_count
         << " distortion=" << fmt_g17(cb.meta.distortion) << "\n";
    return 0;
}

int run_trace(const CommonArgs& common, const std::string& out_flag,
              const std::string& codebook_path) {
    std::string cfg_out;
    const SimConfig cfg = common.build(&cfg_out);
    const std::string out = out_flag.empty() ? cfg_out : out_flag;
    if (out.empty()) throw ParameterError("trace-session needs --out");
    validate_output_path(out);
    if (out != "-") validate_output_path(out + ".frames");
    if (cfg.zeta_list.empty()) throw ParameterError("trace-session needs a zeta");

    StepCodebook cb;
    const StepCodebook* cbp = nullptr;
    if (!codebook_path.empty()) {
        cb = load_codebook(codebook_path);
        if (cb.bits != cfg.quantizer_bits)
            throw ParameterError("codebook bits do not match --bits");
        cbp = &cb;
    }

    RngStream s = RngStream(cfg.master_seed).derive(kSaltTrace);
    RngStream chan_rng = s.derive(0);
    RngStream train_rng = s.derive(1);
    const ChannelVector h = draw_complex_gaussian(chan_rng, cfg.n_t, 1.0);
    const ChannelVector h0(cfg.n_t, {0.0, 0.0});
    const TrainingSequence training =
        make_training(train_rng, cfg.training_length(), cfg.n_t, cfg.training_kind);
    const SessionTrace trace =
        run_session(h, h0, training, cbp, cfg.zeta_list.front(), cfg.max_iters);

    write_output(out, trace_to_csv(trace));
    if (out != "-") atomic_write_file(out + ".frames", trace_frames_to_text(trace, cfg.quantizer_bits));
    std::cerr << "session: iterations=" << trace.iterations_run()
              << " converged=" << (trace.converged ? 1 : 0)
              << " err=" << fmt_g17(std::sqrt(trace.records.empty()
                                                  ? trace.initial_err_sq
                                                  : trace.records.back().err_sq))
              << "\n";
    return 0;
}

int run_sweep(const CommonArgs& common, const std::string& out_flag,
              const std::vector<std::string>& codebook_paths) {
    std::string cfg_out;
    const SimConfig cfg = common.build(&cfg_out);
    const std::string out = out_flag.empty() ? cfg_out : out_flag;
    if (out.empty()) throw ParameterError("ber-sweep needs --out");
    validate_output_path(out);

    std::vector<StepCodebook> loaded;
    loaded.reserve(codebook_paths.size());
    for (const auto& p : codebook_paths) loaded.push_back(load_codebook(p));

    std::vector<const StepCodebook*> per_zeta(cfg.zeta_list.size(), nullptr);
    if (loaded.size() == 1) {
        for (auto& p : per_zeta) p = &loaded.front();
    } else if (loaded.size() == cfg.zeta_list.size()) {
        for (std::size_t i = 0; i < loaded.size(); ++i) per_zeta[i] = &loaded[i];
    } else if (!loaded.empty()) {
        throw ParameterError("--codebook count must be 1 or match the zeta count");
    }

    const BerTable table = run_ber_sweep(cfg, per_zeta, stderr_progress("ber-sweep"));
    write_output(out, ber_table_to_csv(table));
    return 0;
}

int run_hist(const CommonArgs& common, const std::string& out_flag, std::uint64_t sessions,
             std::size_t bins) {
    std::string cfg_out;
    const SimConfig cfg = common.build(&cfg_out);
    const std::string out = out_flag.empty() ? cfg_out : out_flag;
    if (out.empty()) throw ParameterError("histogram needs --out");
    validate_output_path(out);

    const Histogram h = run_histogram(cfg, sessions, bins);
    write_output(out, histogram_to_csv(h));
    std::cerr << "histogram: samples=" << h.total << " mean=" << fmt_g17(h.sample_mean)
              << " std=" << fmt_g17(h.sample_std) << " skewness=" << fmt_g17(h.skewness) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        CLI::App app{"link-level simulator for adaptive partial-feedback channel estimation"};
        app.require_subcommand(1);

        int rc = 0;

        auto* design = app.add_subcommand(
            "design-quantizer", "train a Lloyd-Max step-size codebook and write it to a file");
        CommonArgs design_args;
        design_args.add_to(design);
        std::string design_out;
        std::uint64_t design_sessions = 8000;
        std::string design_samples;
        design->add_option("--out", design_out, "codebook output path ('-' = stdout)");
        design->add_option("--sessions", design_sessions, "pilot sessions to collect mu from");
        design->add_option("--samples", design_samples,
                           "train on whitespace-separated samples from this file instead");
        design->callback(
            [&] { rc = run_design(design_args, design_out, design_sessions, design_samples); });

        auto* trace = app.add_subcommand("trace-session",
                                         "run one seeded estimation session and dump its trace");
        CommonArgs trace_args;
        trace_args.add_to(trace);
        std::string trace_out, trace_codebook;
        trace->add_option("--out", trace_out,
                          "trace CSV path ('-' = stdout; frames go to <out>.frames)");
        trace->add_option("--codebook", trace_codebook,
                          "codebook file for quantized feedback (omit = ideal feedback)");
        trace->callback([&] { rc = run_trace(trace_args, trace_out, trace_codebook); });

        auto* sweep =
            app.add_subcommand("ber-sweep", "Monte-Carlo BER vs TNR for OBS and SOBS curves");
        CommonArgs sweep_args;
        sweep_args.add_to(sweep);
        std::string sweep_out;
        std::vector<std::string> sweep_codebooks;
        sweep->add_option("--out", sweep_out, "BER CSV path ('-' = stdout)");
        sweep->add_option("--codebook", sweep_codebooks,
                          "codebook file(s): one shared, or one per zeta (omit = ideal feedback)");
        sweep->callback([&] { rc = run_sweep(sweep_args, sweep_out, sweep_codebooks); });

        auto* hist = app.add_subcommand("histogram", "step-size histogram from pilot sessions");
        CommonArgs hist_args;
        hist_args.add_to(hist);
        std::string hist_out;
        std::uint64_t hist_sessions = 10000;
        std::size_t hist_bins = 101;
        hist->add_option("--out", hist_out, "histogram CSV path ('-' = stdout)");
        hist->add_option("--sessions", hist_sessions, "pilot sessions to collect mu from");
        hist->add_option("--bins", hist_bins, "bin count");
        hist->callback([&] { rc = run_hist(hist_args, hist_out, hist_sessions, hist_bins); });

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e);
        }
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
