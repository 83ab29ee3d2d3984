#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "zsseg/harness.hpp"

using namespace zsseg;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string setting;
    std::optional<std::string> unseen;
    std::string direction;
    bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool with_setting = true) {
    app->add_option("-c,--config", c.config, "key = value config file (defaults are used when omitted)");
    app->add_option("-s,--seed", c.seed, "override the seed for this command");
    app->add_option("-o,--out", c.out, "output directory");
    if (with_setting) app->add_option("--setting", c.setting, "ablation setting a-g")->check(CLI::IsMember({"a", "b", "c", "d", "e", "f", "g"}));
    app->add_option("-u,--unseen", c.unseen, "unseen structure indices, comma separated (empty for none)");
    app->add_option("-d,--direction", c.direction, "a2b or b2a")->check(CLI::IsMember({"a2b", "b2a"}));
    app->add_flag("-q,--quiet", c.quiet, "no progress output");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (!c.out.empty()) cfg.out = c.out;
    if (!c.setting.empty()) cfg.setting = c.setting[0];
    if (c.unseen) cfg.unseen = cfgio::parse_ints(*c.unseen);
    if (c.direction == "a2b") cfg.direction = Direction::a_to_b;
    if (c.direction == "b2a") cfg.direction = Direction::b_to_a;
    if (c.seed) cfg.seed = *c.seed;
    cfg.validate();
    return cfg;
}

void load_prior_if_given(Lab& lab, const std::string& path) {
    if (!path.empty()) lab.set_prior(load_checkpoint<SegmentationNet>(path));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal zero-shot segmentation on synthetic two-modality data"};
    app.require_subcommand(1);

    Common gen_c, prior_c, zs_c, eval_c, abl_c, sweep_c, bench_c;
    std::string report_root, report_out;
    std::string zs_prior, abl_prior, sweep_prior, bench_prior, eval_prior, eval_model;
    int max_unseen = 3;
    bool eval_attention = false;
    bool write_config = false;

    auto* gen = app.add_subcommand("gen-data", "build the two-modality dataset and write it to <out>/data");
    add_common(gen, gen_c, false);
    gen->add_flag("--write-config", write_config, "also write the resolved config to <out>/config.cfg");

    auto* prior = app.add_subcommand("train-prior", "train the prior model on the source modality");
    add_common(prior, prior_c, false);

    auto* zs = app.add_subcommand("train-zeroshot", "run one stage-2 experiment into <out>/cells/<name>");
    add_common(zs, zs_c);
    zs->add_option("--prior", zs_prior, "prior checkpoint (trained when omitted)");

    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint on the target test split");
    add_common(ev, eval_c, false);
    ev->add_option("-m,--model", eval_model, "model checkpoint")->required();
    ev->add_option("--prior", eval_prior, "prior checkpoint (needed with --attention)");
    ev->add_flag("--attention", eval_attention, "model uses inheritance attention");

    auto* abl = app.add_subcommand("ablate", "settings a-g with each structure unseen in turn");
    add_common(abl, abl_c, false);
    abl->add_option("--prior", abl_prior, "prior checkpoint (trained when omitted)");

    auto* sw = app.add_subcommand("sweep", "all combinations of 1..max unseen structures");
    add_common(sw, sweep_c);
    sw->add_option("--max-unseen", max_unseen, "largest unseen-set size")->check(CLI::Range(1, 254));
    sw->add_option("--prior", sweep_prior, "prior checkpoint (trained when omitted)");

    auto* bench = app.add_subcommand("benchmarks", "lower bound, baseline and Oracle on the shared test split");
    add_common(bench, bench_c, false);
    bench->add_option("--prior", bench_prior, "prior checkpoint (trained when omitted)");

    auto* rep = app.add_subcommand("report", "combine every completed run under a directory");
    rep->add_option("-i,--input", report_root, "directory containing cells/")->required();
    rep->add_option("-o,--out", report_out, "output directory (defaults to <input>/report)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            ExperimentConfig cfg = resolve(gen_c);
            if (gen_c.seed) cfg.data.seed = *gen_c.seed;
            const DatasetBundle b = build_bundle(cfg.bundle_config());
            const std::string dir = (std::filesystem::path(cfg.out) / "data").string();
            save_bundle(b, dir);
            if (write_config) save_config((std::filesystem::path(cfg.out) / "config.cfg").string(), cfg);
            std::cout << "wrote " << b.prior.size() << " prior and " << b.mirror.size() << " target samples to " << dir
                      << '\n';
            return 0;
        }
        if (*prior) {
            ExperimentConfig cfg = resolve(prior_c);
            if (prior_c.seed) cfg.prior.seed = *prior_c.seed;
            Lab lab(cfg, !prior_c.quiet);
            lab.prior();
            const MetricReport lb = lab.lower_bound(cfg.unseen);
            std::cout << metrics_table({lb}, "prior evaluated on the target test split");
            return 0;
        }
        if (*zs) {
            const ExperimentConfig cfg = resolve(zs_c);
            Lab lab(cfg, !zs_c.quiet);
            load_prior_if_given(lab, zs_prior);
            const RunResult& r = lab.run(cfg.setting, cfg.unseen);
            if (!r.ok) {
                std::cerr << "error: " << r.error << '\n';
                return 1;
            }
            std::cout << metrics_table({r.report}, "run " + r.report.tag);
            return 0;
        }
        if (*ev) {
            const ExperimentConfig cfg = resolve(eval_c);
            const auto model = load_checkpoint<SegmentationNet>(eval_model);
            std::optional<SegmentationNet> p;
            if (!eval_prior.empty()) p = load_checkpoint<SegmentationNet>(eval_prior);
            if (eval_attention && !p) throw std::invalid_argument("--attention needs --prior");
            const DatasetBundle b = build_bundle(cfg.bundle_config());
            MetricReport r = evaluate(model, p ? &*p : nullptr, eval_attention, b, b.test, cfg.metrics);
            r.tag = std::filesystem::path(eval_model).stem().string();
            std::cout << metrics_table({r});
            if (!eval_c.out.empty()) {
                std::filesystem::create_directories(cfg.out);
                write_text_file(cfg.out + "/evaluation.csv", metrics_csv({r}));
            }
            return 0;
        }
        if (*abl) {
            const ExperimentConfig cfg = resolve(abl_c);
            Lab lab(cfg, !abl_c.quiet);
            load_prior_if_given(lab, abl_prior);
            const AblationMatrix m = run_ablation_matrix(lab);
            write_ablation_report(cfg.out + "/ablation", m);
            std::cout << ablation_table(m);
            if (m.failures() > 0) {
                std::cerr << "error: " << m.failures() << " matrix cells failed\n";
                return 1;
            }
            return 0;
        }
        if (*sw) {
            const ExperimentConfig cfg = resolve(sweep_c);
            Lab lab(cfg, !sweep_c.quiet);
            load_prior_if_given(lab, sweep_prior);
            const UnseenSweep s = run_unseen_sweep(lab, max_unseen, cfg.setting);
            write_sweep_report(cfg.out + "/sweep", s);
            std::cout << sweep_table(s);
            for (const auto* r : s.runs)
                if (!r->ok) {
                    std::cerr << "error: sweep run " << cell_name(r->config.setting, r->config.unseen)
                              << " failed: " << r->error << '\n';
                    return 1;
                }
            return 0;
        }
        if (*bench) {
            const ExperimentConfig cfg = resolve(bench_c);
            Lab lab(cfg, !bench_c.quiet);
            load_prior_if_given(lab, bench_prior);
            const BenchmarkSuite b = run_benchmarks(lab);
            write_benchmark_report(cfg.out + "/benchmarks", b);
            std::cout << benchmark_table(b);
            return 0;
        }
        if (*rep) {
            const std::string out = report_out.empty() ? report_root + "/report" : report_out;
            const std::size_t n = emit_report(report_root, out);
            std::cout << "combined " << n << " reports into " << out << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
