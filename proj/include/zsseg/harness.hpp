#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "zsseg/checkpoint.hpp"
#include "zsseg/config.hpp"
#include "zsseg/datagen.hpp"
#include "zsseg/metrics.hpp"
#include "zsseg/plots.hpp"
#include "zsseg/training.hpp"

namespace zsseg {

namespace fs = std::filesystem;

struct RunResult {
    ExperimentConfig config;
    bool ok = false;
    std::string error;
    std::string dir;
    MetricReport report;
    std::vector<HistoryRow> history;
};

inline std::string cell_name(char setting, const std::vector<int>& unseen) {
    std::string s(1, setting);
    s += "_u";
    if (unseen.empty()) s += "none";
    for (std::size_t i = 0; i < unseen.size(); ++i) s += (i ? "-" : "") + std::to_string(unseen[i]);
    return s;
}

// Shared state for a family of runs that differ only in setting and unseen
// set: the dataset images, the prior and the Oracle are built once.
class Lab {
public:
    explicit Lab(ExperimentConfig base, bool verbose = false) : base_(std::move(base)), verbose_(verbose) {
        base_.validate();
    }

    [[nodiscard]] const ExperimentConfig& base() const { return base_; }
    [[nodiscard]] bool writes() const { return !base_.out.empty(); }

    [[nodiscard]] ExperimentConfig config_for(char setting, std::vector<int> unseen) const {
        ExperimentConfig c = base_;
        std::sort(unseen.begin(), unseen.end());
        c.setting = setting;
        c.unseen = std::move(unseen);
        c.validate();
        return c;
    }

    const DatasetBundle& bundle(std::vector<int> unseen) {
        std::sort(unseen.begin(), unseen.end());
        const std::string key = cfgio::fmt_ints(unseen);
        auto it = bundles_.find(key);
        if (it != bundles_.end()) return it->second;
        ExperimentConfig c = base_;
        c.unseen = unseen;
        return bundles_.emplace(key, build_bundle(c.bundle_config())).first->second;
    }

    // Images and labels do not depend on the unseen set.
    const DatasetBundle& full_bundle() { return bundle({}); }

    const SegmentationNet& prior() {
        if (!prior_) {
            log("training prior");
            PriorResult r = train_prior(full_bundle(), base_.network_config(), base_.prior);
            prior_loss_ = r.loss;
            prior_ = std::make_unique<SegmentationNet>(std::move(r.model));
            if (writes()) {
                fs::create_directories(base_.out);
                save_checkpoint((fs::path(base_.out) / "prior.ckpt").string(), *prior_, 0, "prior");
                write_text_file((fs::path(base_.out) / "prior_loss.csv").string(), loss_csv(prior_loss_));
            }
        }
        return *prior_;
    }

    void set_prior(SegmentationNet prior) {
        if (!(prior.config == base_.network_config()))
            throw ConfigError("prior checkpoint does not match the configured network");
        prior_ = std::make_unique<SegmentationNet>(std::move(prior));
    }

    const SegmentationNet& oracle() {
        if (!oracle_) {
            log("training oracle");
            PriorConfig pc = base_.prior;
            oracle_ = std::make_unique<SegmentationNet>(train_oracle(full_bundle(), base_.network_config(), pc).model);
            if (writes()) {
                fs::create_directories(base_.out);
                save_checkpoint((fs::path(base_.out) / "oracle.ckpt").string(), *oracle_, 0, "oracle");
            }
        }
        return *oracle_;
    }

    MetricReport lower_bound(const std::vector<int>& unseen = {}) {
        const DatasetBundle& d = bundle(unseen);
        MetricReport r = evaluate(prior(), nullptr, false, d, d.test, base_.metrics);
        r.tag = "lower_bound";
        r.setting = "lower bound";
        return r;
    }

    MetricReport oracle_report() {
        const DatasetBundle& d = full_bundle();
        MetricReport r = evaluate(oracle(), nullptr, false, d, d.test, base_.metrics);
        r.tag = "oracle";
        r.setting = "oracle";
        return r;
    }

    // Runs (or returns the memoised result of) one stage-2 experiment.
    // Failures are recorded in the result instead of propagating.
    const RunResult& run(char setting, const std::vector<int>& unseen) {
        const ExperimentConfig cfg = config_for(setting, unseen);
        const std::string name = cell_name(setting, cfg.unseen);
        auto it = runs_.find(name);
        if (it != runs_.end()) return it->second;
        RunResult res;
        res.config = cfg;
        if (writes()) res.dir = (fs::path(base_.out) / "cells" / name).string();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (writes()) {
                fs::create_directories(res.dir);
                write_text_file(res.dir + "/status", "incomplete\n");
                save_config(res.dir + "/config.cfg", cfg);
            }
            execute(cfg, res);
            res.ok = true;
            if (writes()) write_text_file(res.dir + "/status", "complete\n");
        } catch (const std::exception& e) {
            res.ok = false;
            res.error = e.what();
            if (writes()) {
                try {
                    write_text_file(res.dir + "/status", "failed: " + res.error + "\n");
                } catch (...) {
                }
            }
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (res.ok)
            log(name + " done in " + std::to_string(static_cast<int>(secs)) + "s: seen " +
                detail::fmt(res.report.seen_mean(), 3) + " unseen " + detail::fmt(res.report.unseen_mean(), 3));
        else
            log(name + " FAILED: " + res.error);
        return runs_.emplace(name, std::move(res)).first->second;
    }

    static std::string loss_csv(const std::vector<Real>& loss) {
        std::ostringstream os;
        os << "step,loss\n" << std::setprecision(17);
        for (std::size_t i = 0; i < loss.size(); ++i) os << i << ',' << loss[i] << '\n';
        return os.str();
    }

    void log(const std::string& msg) const {
        if (verbose_) std::clog << "[zsseg] " << msg << std::endl;
    }

private:
    void execute(const ExperimentConfig& cfg, RunResult& res) {
        const DatasetBundle& data = bundle(cfg.unseen);
        const SegmentationNet& p = prior();
        const AblationSetup setup = configure_ablation(cfg.setting, cfg.weights);
        CheckpointHook hook;
        if (writes()) {
            const std::string dir = res.dir + "/checkpoints";
            fs::create_directories(dir);
            hook = [dir](const TrainState& st, int epoch) {
                std::ostringstream n;
                n << dir << "/epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
                save_checkpoint(n.str(), st.model, st.step, "zero-shot");
            };
        }
        log("running " + cell_name(cfg.setting, cfg.unseen));
        ZeroShotResult z = train_zeroshot(data, p, setup, cfg.train, cfg.seed, hook);
        res.history = std::move(z.history);
        res.report = evaluate(z.model, &p, setup.switches.ia, data, data.test, cfg.metrics);
        res.report.tag = cell_name(cfg.setting, cfg.unseen);
        res.report.setting = std::string(1, cfg.setting);
        if (writes()) {
            write_text_file(res.dir + "/history.csv", history_csv(res.history));
            write_text_file(res.dir + "/report.csv", metrics_csv({res.report}));
            write_text_file(res.dir + "/report.txt", metrics_table({res.report}, "run " + res.report.tag));
            write_text_file(res.dir + "/loss_curves.svg", loss_curves_svg(res.history, "losses " + res.report.tag));
            write_text_file(res.dir + "/dice_bars.svg", dice_bars_svg({res.report}, "Dice " + res.report.tag));
            save_checkpoint(res.dir + "/model.ckpt", z.model, res.history.empty() ? 0 : res.history.back().step + 1,
                            "zero-shot");
            save_checkpoint(res.dir + "/discriminator.ckpt", z.disc, 0, "discriminator");
        }
    }

    ExperimentConfig base_;
    bool verbose_;
    std::map<std::string, DatasetBundle> bundles_;
    std::unique_ptr<SegmentationNet> prior_;
    std::unique_ptr<SegmentationNet> oracle_;
    std::vector<Real> prior_loss_;
    std::map<std::string, RunResult> runs_;
};

// Single experiment from a full config.
inline RunResult run_experiment(const ExperimentConfig& cfg, bool verbose = false) {
    Lab lab(cfg, verbose);
    return lab.run(cfg.setting, cfg.unseen);
}

// ---------------------------------------------------------------------------
// Ablation matrix: settings a-g, each structure as the single unseen class.

struct AblationMatrix {
    std::vector<char> settings;
    std::vector<int> classes;
    std::vector<const RunResult*> cells;  // settings-major
    MetricReport lower_bound;

    [[nodiscard]] const RunResult& at(char setting, int cls) const {
        const auto si = std::find(settings.begin(), settings.end(), setting) - settings.begin();
        const auto ci = std::find(classes.begin(), classes.end(), cls) - classes.begin();
        if (si >= static_cast<long>(settings.size()) || ci >= static_cast<long>(classes.size()))
            throw std::out_of_range("no such matrix cell");
        return *cells.at(static_cast<std::size_t>(si) * classes.size() + static_cast<std::size_t>(ci));
    }

    // Dice of class `cls` when it is the unseen class (NaN on failure).
    [[nodiscard]] Real collective(char setting, int cls) const {
        const RunResult& r = at(setting, cls);
        return r.ok ? r.report.dice[cls] : std::numeric_limits<Real>::quiet_NaN();
    }

    [[nodiscard]] Real collective_mean(char setting) const {
        Real s = 0.0;
        for (int c : classes) s += collective(setting, c);
        return s / static_cast<Real>(classes.size());
    }

    // Mean over cells of each cell's all-structure mean Dice.
    [[nodiscard]] Real mean_dice(char setting) const {
        Real s = 0.0;
        for (int c : classes) {
            const RunResult& r = at(setting, c);
            s += r.ok ? r.report.overall_mean() : std::numeric_limits<Real>::quiet_NaN();
        }
        return s / static_cast<Real>(classes.size());
    }

    [[nodiscard]] int failures() const {
        return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const RunResult* r) { return !r->ok; }));
    }
};

inline AblationMatrix run_ablation_matrix(Lab& lab, const std::vector<char>& settings = {'a', 'b', 'c', 'd', 'e', 'f', 'g'}) {
    AblationMatrix m;
    m.settings = settings;
    for (int c = 1; c < lab.base().data.layout.num_classes(); ++c) m.classes.push_back(c);
    m.lower_bound = lab.lower_bound();
    for (char s : settings)
        for (int c : m.classes) m.cells.push_back(&lab.run(s, {c}));
    return m;
}

// ---------------------------------------------------------------------------
// Unseen-class sweep: every combination of 1..max_unseen structures.

inline std::vector<std::vector<int>> unseen_combinations(int structures, int max_unseen) {
    std::vector<std::vector<int>> out;
    for (int k = 1; k <= std::min(max_unseen, structures - 1); ++k) {
        std::vector<bool> pick(structures, false);
        std::fill(pick.begin(), pick.begin() + k, true);
        do {
            std::vector<int> combo;
            for (int i = 0; i < structures; ++i)
                if (pick[i]) combo.push_back(i + 1);
            out.push_back(combo);
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return out;
}

struct UnseenSweep {
    char setting = 'g';
    std::vector<const RunResult*> runs;
    MetricReport lower_bound;

    // Mean unseen Dice over all completed runs with `count` unseen classes.
    [[nodiscard]] Real mean_unseen(int count) const {
        Real s = 0.0;
        int n = 0;
        for (const auto* r : runs)
            if (r->ok && static_cast<int>(r->config.unseen.size()) == count) {
                s += r->report.unseen_mean();
                ++n;
            }
        return n ? s / n : std::numeric_limits<Real>::quiet_NaN();
    }
    [[nodiscard]] Real mean_seen(int count) const {
        Real s = 0.0;
        int n = 0;
        for (const auto* r : runs)
            if (r->ok && static_cast<int>(r->config.unseen.size()) == count) {
                s += r->report.seen_mean();
                ++n;
            }
        return n ? s / n : std::numeric_limits<Real>::quiet_NaN();
    }
    [[nodiscard]] int max_count() const {
        int m = 0;
        for (const auto* r : runs) m = std::max(m, static_cast<int>(r->config.unseen.size()));
        return m;
    }
};

inline UnseenSweep run_unseen_sweep(Lab& lab, int max_unseen = 3, char setting = 'g') {
    if (max_unseen < 1) throw std::invalid_argument("max_unseen must be >= 1");
    UnseenSweep s;
    s.setting = setting;
    s.lower_bound = lab.lower_bound();
    const int n = lab.base().data.layout.num_classes() - 1;
    for (const auto& combo : unseen_combinations(n, max_unseen)) s.runs.push_back(&lab.run(setting, combo));
    return s;
}

// ---------------------------------------------------------------------------
// Benchmarks.

struct BenchmarkSuite {
    MetricReport lower_bound;
    MetricReport oracle;
    MetricReport baseline;
};

inline BenchmarkSuite run_benchmarks(Lab& lab) {
    BenchmarkSuite b;
    const auto& unseen = lab.base().unseen;
    b.lower_bound = lab.lower_bound(unseen);
    b.oracle = lab.oracle_report();
    const RunResult& a = lab.run('a', unseen);
    if (!a.ok) throw std::runtime_error("baseline run failed: " + a.error);
    b.baseline = a.report;
    b.baseline.tag = "baseline";
    return b;
}

// ---------------------------------------------------------------------------
// Reports.

namespace detail {

inline std::string module_marks(char setting) {
    if (setting == 'a') return "      baseline      ";
    const ModuleSwitches m = configure_ablation(setting).switches;
    const auto mark = [](bool b) { return b ? "  x  " : "  .  "; };
    return std::string(mark(m.background)) + mark(m.rpa) + mark(m.cma) + mark(m.ia);
}

inline std::string cell_pct(Real v, bool unseen) {
    std::ostringstream os;
    os << std::right << std::setw(9) << (std::isnan(v) ? std::string("FAILED") : pct(v) + (unseen ? "*" : " "));
    return os.str();
}

}  // namespace detail

// Text layout: one block per unseen structure with rows a-g, then the
// collective unseen results and the lower bound.
inline std::string ablation_table(const AblationMatrix& m) {
    std::ostringstream os;
    const auto& names = m.lower_bound.class_names;
    const auto header = [&](const std::string& lead) {
        os << std::left << std::setw(26) << lead << "L_Bg  RPA  CMA  IA  ";
        for (int c : m.classes) os << std::right << std::setw(9) << names[c];
        os << std::setw(9) << "mean" << '\n';
    };
    os << "Ablation of modules (Dice %, * = unseen class)\n\n";
    for (int u : m.classes) {
        header("unseen: " + names[u]);
        for (char s : m.settings) {
            const RunResult& r = m.at(s, u);
            os << std::left << std::setw(26) << ("  (" + std::string(1, s) + ")") << detail::module_marks(s);
            for (int c : m.classes) os << detail::cell_pct(r.ok ? r.report.dice[c] : std::nan(""), c == u);
            os << detail::cell_pct(r.ok ? r.report.overall_mean() : std::nan(""), false);
            if (!r.ok) os << "  [" << r.error << "]";
            os << '\n';
        }
        os << '\n';
    }
    header("collective unseen");
    for (char s : m.settings) {
        os << std::left << std::setw(26) << ("  (" + std::string(1, s) + ")") << detail::module_marks(s);
        for (int c : m.classes) os << detail::cell_pct(m.collective(s, c), false);
        os << detail::cell_pct(m.collective_mean(s), false) << '\n';
    }
    os << std::left << std::setw(46) << "lower bound";
    for (int c : m.classes) os << detail::cell_pct(m.lower_bound.dice[c], false);
    os << detail::cell_pct(m.lower_bound.overall_mean(), false) << '\n';
    return os.str();
}

inline std::string ablation_csv(const AblationMatrix& m) {
    std::ostringstream os;
    os << metrics_csv_header();
    for (const auto* r : m.cells) {
        if (r->ok) {
            os << metrics_csv_rows(r->report);
        } else {
            os << cell_name(r->config.setting, r->config.unseen) << ',' << r->config.setting << ",FAILED,,,,nan,nan,,\n";
        }
    }
    const auto& names = m.lower_bound.class_names;
    for (char s : m.settings)
        for (int c : m.classes)
            os << "collective," << s << ',' << names[c] << ',' << c << ',' << names[c] << ",unseen,"
               << detail::fmt(m.collective(s, c), 6) << ",,," << m.lower_bound.images << '\n';
    os << metrics_csv_rows(m.lower_bound);
    return os.str();
}

inline std::string sweep_table(const UnseenSweep& s) {
    std::ostringstream os;
    const auto& names = s.lower_bound.class_names;
    os << "Unseen-class sweep, setting (" << s.setting << ") (Dice %, * = unseen class)\n\n";
    os << std::left << std::setw(34) << "unseen set";
    for (std::size_t c = 1; c < names.size(); ++c) os << std::right << std::setw(9) << names[c];
    os << std::setw(9) << "seen" << std::setw(9) << "unseen" << std::setw(9) << "mean" << '\n';
    for (const auto* r : s.runs) {
        os << std::left << std::setw(34) << r->report.unseen_label();
        if (!r->ok) {
            os << "FAILED: " << r->error << '\n';
            continue;
        }
        for (std::size_t c = 1; c < names.size(); ++c)
            os << detail::cell_pct(r->report.dice[c], r->report.is_unseen(static_cast<int>(c)));
        os << detail::cell_pct(r->report.seen_mean(), false) << detail::cell_pct(r->report.unseen_mean(), false)
           << detail::cell_pct(r->report.overall_mean(), false) << '\n';
    }
    os << '\n' << std::left << std::setw(34) << "lower bound";
    for (std::size_t c = 1; c < names.size(); ++c) os << detail::cell_pct(s.lower_bound.dice[c], false);
    os << '\n' << "\nunseen count  mean seen  mean unseen\n";
    for (int k = 1; k <= s.max_count(); ++k)
        os << std::setw(12) << k << detail::cell_pct(s.mean_seen(k), false) << "  "
           << detail::cell_pct(s.mean_unseen(k), false) << '\n';
    return os.str();
}

inline std::string sweep_csv(const UnseenSweep& s) {
    std::ostringstream os;
    os << metrics_csv_header();
    for (const auto* r : s.runs)
        os << (r->ok ? metrics_csv_rows(r->report)
                     : cell_name(r->config.setting, r->config.unseen) + "," + r->config.setting + ",FAILED,,,,nan,nan,,\n");
    os << metrics_csv_rows(s.lower_bound);
    return os.str();
}

inline std::string benchmark_table(const BenchmarkSuite& b) {
    return metrics_table({b.lower_bound, b.baseline, b.oracle}, "Benchmarks (shared test split)");
}

inline void write_ablation_report(const std::string& dir, const AblationMatrix& m) {
    fs::create_directories(dir);
    write_text_file(dir + "/ablation.csv", ablation_csv(m));
    write_text_file(dir + "/ablation.txt", ablation_table(m));
    for (char s : m.settings) {
        std::vector<MetricReport> reps;
        for (int c : m.classes)
            if (m.at(s, c).ok) reps.push_back(m.at(s, c).report);
        reps.push_back(m.lower_bound);
        write_text_file(dir + "/dice_bars_" + std::string(1, s) + ".svg",
                        dice_bars_svg(reps, "Dice per class, setting (" + std::string(1, s) + ")"));
    }
}

inline void write_sweep_report(const std::string& dir, const UnseenSweep& s) {
    fs::create_directories(dir);
    write_text_file(dir + "/sweep.csv", sweep_csv(s));
    write_text_file(dir + "/sweep.txt", sweep_table(s));
    std::vector<MetricReport> reps;
    for (const auto* r : s.runs)
        if (r->ok) {
            reps.push_back(r->report);
            reps.back().setting = r->report.unseen_label();
        }
    write_text_file(dir + "/dice_bars.svg", dice_bars_svg(reps, "Dice per class by unseen set"));
}

inline void write_benchmark_report(const std::string& dir, const BenchmarkSuite& b) {
    fs::create_directories(dir);
    write_text_file(dir + "/benchmarks.csv", metrics_csv({b.lower_bound, b.baseline, b.oracle}));
    write_text_file(dir + "/benchmarks.txt", benchmark_table(b));
    write_text_file(dir + "/dice_bars.svg", dice_bars_svg({b.lower_bound, b.baseline, b.oracle}, "Benchmarks"));
}

// Rebuilds reports from metric CSV text (rows without a Dice value are skipped).
inline std::vector<MetricReport> parse_metrics_csv(const std::string& text) {
    std::vector<MetricReport> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    if (line + "\n" != metrics_csv_header()) throw FormatError("unexpected metrics CSV header");
    while (std::getline(in, line)) {
        const auto f = cfgio::split(line, ',');
        if (f.size() != 10 || f[3].empty() || f[0] == "collective") continue;
        const int c = cfgio::parse_int<int>(f[3]);
        if (out.empty() || out.back().tag != f[0] || out.back().setting != f[1]) {
            MetricReport r;
            r.tag = f[0];
            r.setting = f[1];
            r.class_names = {"background"};
            out.push_back(r);
        }
        MetricReport& r = out.back();
        if (c != r.num_classes()) throw FormatError("metrics CSV rows out of class order");
        r.class_names.push_back(f[4]);
        if (f[5] == "unseen") r.unseen.push_back(c);
        const auto real = [](const std::string& s) {
            return s == "nan" || s.empty() ? std::numeric_limits<Real>::quiet_NaN() : cfgio::parse_real(s);
        };
        if (r.dice.empty()) {
            r.dice.push_back(std::nan(""));
            r.assd.push_back(std::nan(""));
            r.assd_undefined.push_back(0);
        }
        r.dice.push_back(real(f[6]));
        r.assd.push_back(real(f[7]));
        r.assd_undefined.push_back(f[8].empty() ? 0 : cfgio::parse_int<int>(f[8]));
        r.images = f[9].empty() ? 0 : cfgio::parse_int<int>(f[9]);
    }
    return out;
}

// Collects every cells/*/report.csv under `root` into one CSV, a text table
// and a bar plot.  Returns the number of reports found.
inline std::size_t emit_report(const std::string& root, const std::string& out_dir) {
    std::vector<fs::path> files;
    const fs::path cells = fs::path(root) / "cells";
    if (fs::exists(cells))
        for (const auto& e : fs::directory_iterator(cells))
            if (fs::exists(e.path() / "report.csv")) files.push_back(e.path() / "report.csv");
    std::sort(files.begin(), files.end());
    std::vector<MetricReport> reps;
    for (const auto& f : files) {
        auto r = parse_metrics_csv(read_text_file(f.string()));
        reps.insert(reps.end(), r.begin(), r.end());
    }
    if (reps.empty()) throw std::runtime_error("no completed runs under " + cells.string());
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/combined.csv", metrics_csv(reps));
    write_text_file(out_dir + "/combined.txt", metrics_table(reps, "All runs"));
    write_text_file(out_dir + "/dice_bars.svg", dice_bars_svg(reps, "Dice per class, all runs"));
    return reps.size();
}

}  // namespace zsseg
