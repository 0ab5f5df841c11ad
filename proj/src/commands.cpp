#include "hardcl/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

#include "hardcl/config.hpp"
#include "hardcl/errors.hpp"
#include "hardcl/format.hpp"
#include "hardcl/instances.hpp"
#include "hardcl/losses.hpp"
#include "hardcl/synth.hpp"
#include "hardcl/theory.hpp"
#include "hardcl/trainer.hpp"

namespace hardcl {

namespace {

using nlohmann::json;

constexpr std::string_view kCommonKeys[] = {
    "similarity.gamma",    "data.path",           "mixture.n_classes", "mixture.ambient_dim",
    "mixture.n_per_class", "mixture.separation",  "mixture.noise_sigma", "mixture.seed",
    "embedder.hidden_widths", "embedder.dim",
};

constexpr std::string_view kTrainKeys[] = {
    "train.setting",    "train.epochs",       "train.batch_size",
    "train.learning_rate", "train.M",         "train.beta",
    "train.tau_start",  "train.tau_end",      "train.aug_sigma",
    "train.seed",       "train.losses_every", "train.probe_every",
    "train.probe_train_fraction",
};

constexpr std::string_view kCompareKeys[] = {"compare.settings", "compare.seeds"};

constexpr std::string_view kVerifyKeys[] = {
    "verify.trials_prop1", "verify.trials_prop2",  "verify.trials_lemma",
    "verify.trials_counterexample", "verify.seed", "verify.beta",
    "verify.tau",          "verify.negative_control",
};

std::vector<std::string_view> allowed_keys(std::initializer_list<std::span<const std::string_view>> groups) {
    std::vector<std::string_view> keys;
    for (auto g : groups)
        for (auto k : g) keys.push_back(k);
    return keys;
}

KeyValueConfig load_config(const CommandOptions& opt) {
    if (opt.config_path.empty()) return KeyValueConfig{};
    return KeyValueConfig::from_file(opt.config_path);
}

MixtureConfig mixture_from(const KeyValueConfig& cfg, const CommandOptions& opt) {
    MixtureConfig mix;
    mix.n_classes = static_cast<int>(cfg.get_int("mixture.n_classes", mix.n_classes));
    mix.ambient_dim = static_cast<std::size_t>(
        cfg.get_int("mixture.ambient_dim", static_cast<long long>(mix.ambient_dim)));
    mix.n_per_class = static_cast<std::size_t>(
        cfg.get_int("mixture.n_per_class", static_cast<long long>(mix.n_per_class)));
    mix.separation = cfg.get_double("mixture.separation", mix.separation);
    mix.noise_sigma = cfg.get_double("mixture.noise_sigma", mix.noise_sigma);
    mix.seed = cfg.get_u64("mixture.seed", mix.seed);
    if (opt.seed) mix.seed = *opt.seed;
    return mix;
}

Population population_from(const KeyValueConfig& cfg, const CommandOptions& opt) {
    if (cfg.has("data.path")) return Population::load_csv(cfg.get_string("data.path", ""));
    return make_mixture(mixture_from(cfg, opt));
}

std::vector<std::size_t> hidden_widths_from(const KeyValueConfig& cfg) {
    std::vector<std::size_t> widths;
    for (const auto& s : cfg.get_list("embedder.hidden_widths", {"32", "32"})) {
        long long w = parse_int(s);
        if (w < 1) throw InputError("config: embedder.hidden_widths entries must be >= 1");
        widths.push_back(static_cast<std::size_t>(w));
    }
    return widths;
}

TrainConfig train_from(const KeyValueConfig& cfg, const CommandOptions& opt,
                       std::size_t default_cadence) {
    TrainConfig tc;
    tc.setting = parse_setting(cfg.get_string("train.setting", "H-SCL"));
    tc.epochs = static_cast<std::size_t>(cfg.get_int("train.epochs", 100));
    tc.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size", 64));
    tc.learning_rate = cfg.get_double("train.learning_rate", 1e-3);
    tc.gamma = cfg.get_double("similarity.gamma", 0.5);
    tc.m_scale = cfg.get_double("train.M", 0.0);
    if (cfg.has("train.beta")) tc.beta = cfg.get_double("train.beta", 1.0);
    if (cfg.has("train.tau_start") != cfg.has("train.tau_end"))
        throw InputError("config: train.tau_start and train.tau_end must be set together");
    if (cfg.has("train.tau_start"))
        tc.tau_range = std::make_pair(cfg.get_double("train.tau_start", -0.5),
                                      cfg.get_double("train.tau_end", 0.1));
    tc.aug_sigma = cfg.get_double("train.aug_sigma", 0.5);
    tc.embed_dim = static_cast<std::size_t>(cfg.get_int("embedder.dim", 8));
    tc.hidden_widths = hidden_widths_from(cfg);
    tc.seed = cfg.get_u64("train.seed", 1);
    if (opt.seed) tc.seed = *opt.seed;
    tc.losses_every = static_cast<std::size_t>(
        cfg.get_int("train.losses_every", static_cast<long long>(default_cadence)));
    tc.probe_every = static_cast<std::size_t>(
        cfg.get_int("train.probe_every", static_cast<long long>(default_cadence)));
    tc.probe_train_fraction = cfg.get_double("train.probe_train_fraction", 0.7);
    tc.n_threads = opt.threads;
    tc.validate();
    return tc;
}

std::filesystem::path prepare_out_dir(const CommandOptions& opt) {
    std::filesystem::path dir(opt.out_dir.empty() ? "." : opt.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir.string());
    return dir;
}

} // namespace

int cmd_make_data(const CommandOptions& opt) {
    KeyValueConfig cfg = load_config(opt);
    cfg.check_known(allowed_keys({std::span(kCommonKeys)}));
    Population pop = population_from(cfg, opt);
    auto dir = prepare_out_dir(opt);
    pop.save_csv((dir / "population.csv").string());
    std::cout << "wrote " << (dir / "population.csv").string() << " (" << pop.size()
              << " points, " << pop.num_classes() << " classes)\n";
    return 0;
}

int cmd_train(const CommandOptions& opt) {
    KeyValueConfig cfg = load_config(opt);
    cfg.check_known(allowed_keys({std::span(kCommonKeys), std::span(kTrainKeys)}));
    Population pop = population_from(cfg, opt);
    TrainConfig tc = train_from(cfg, opt, 1);

    TrainResult res = train(pop, tc);
    auto dir = prepare_out_dir(opt);
    write_history_csv((dir / "history.csv").string(), res.history);
    res.embedder.save_file((dir / "weights.bin").string());

    // final exact losses under the run's hardening, on a fresh pairing
    Rng pair_rng = Rng(tc.seed).derive(97);
    PositivePairing pairing = frozen_eval_pairing(pop, tc.aug_sigma, pair_rng);
    SimilarityParams p{tc.gamma};
    HardeningSpec h = tc.hardening_at(tc.epochs);
    EmbeddingTable points = embed_population(pop, res.embedder);
    std::vector<std::size_t> anchors;
    EmbeddingTable positives;
    for (const auto& pr : pairing) {
        anchors.push_back(pr.anchor);
        positives.push_back(res.embedder.forward(pr.positive_features));
    }
    std::vector<LossReport> reports;
    for (Setting s : {Setting::Ucl, Setting::Scl, Setting::HUcl, Setting::HScl}) {
        NegSamplingSpec spec{s, h};
        reports.push_back(loss_exact_table(pop, spec, points, anchors, positives, p,
                                           ZeroNegativePolicy::Skip, tc.n_threads)
                              .report);
    }
    write_loss_reports_csv((dir / "losses.csv").string(), reports);

    std::cout << "trained " << to_string(tc.setting) << " for " << tc.epochs
              << " epochs; final probe accuracy "
              << format_double(res.history.back().probe_accuracy) << '\n';
    return 0;
}

int cmd_compare(const CommandOptions& opt) {
    KeyValueConfig cfg = load_config(opt);
    cfg.check_known(allowed_keys(
        {std::span(kCommonKeys), std::span(kTrainKeys), std::span(kCompareKeys)}));
    Population pop = population_from(cfg, opt);
    // evaluation cadence 0: probe and exact losses only at the final epoch
    TrainConfig base = train_from(cfg, opt, 0);

    std::vector<Setting> settings;
    for (const auto& s : cfg.get_list("compare.settings", {"UCL", "H-UCL", "SCL", "H-SCL"}))
        settings.push_back(parse_setting(s));
    std::vector<std::uint64_t> seeds;
    for (const auto& s : cfg.get_list("compare.seeds", {"1", "2", "3", "4", "5"}))
        seeds.push_back(static_cast<std::uint64_t>(parse_int(s)));

    auto rows = run_method_comparison(pop, base, settings, seeds);
    auto dir = prepare_out_dir(opt);
    write_comparison_csv((dir / "comparison.csv").string(), rows);
    for (const auto& r : rows)
        std::cout << r.setting << ": " << format_double(r.mean_acc) << " +/- "
                  << format_double(r.std_acc) << " (" << r.n_seeds << " seeds)\n";
    return 0;
}

namespace {

struct SuiteOutcome {
    json report;
    std::vector<std::string> failures;
};

void run_prop1_suite(Rng& rng, std::size_t trials, SuiteOutcome& out) {
    std::size_t failures = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t n = 2 + rng.uniform_index(39);
        Vec p(n);
        double total = 0.0;
        for (auto& x : p) {
            x = rng.uniform(0.05, 1.0);
            total += x;
        }
        for (auto& x : p) x /= total;
        Vec rho(n);
        for (auto& x : rho) x = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 3.0);
        rho[rng.uniform_index(n)] = rng.uniform(0.5, 3.0);

        Vec r = tilt(p, rho);
        KahanSum rsum, mass, weighted;
        Vec s(n);
        for (auto& x : s) x = rng.uniform(-1.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            rsum.add(r[i]);
            mass.add(rho[i] * p[i]);
            weighted.add(rho[i] * p[i] * s[i]);
        }
        bool ok = std::fabs(rsum.value() - 1.0) <= 1e-12;
        double lhs = expected_under(r, s);
        double rhs = weighted.value() / mass.value();
        ok = ok && std::fabs(lhs - rhs) <= 1e-12;
        if (!ok) ++failures;
    }
    out.report["prop1"] = {{"trials", trials}, {"failures", failures}};
    if (failures > 0)
        out.failures.push_back("tilting identity failed in " + std::to_string(failures) +
                               " of " + std::to_string(trials) + " trials");
}

void run_prop2_suite(Rng& rng, std::size_t trials, SuiteOutcome& out) {
    std::size_t failures = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        EmbedderInstance inst = make_embedder_instance(rng, 200);
        if (!verify_prop2(inst.pop, inst.embedder, inst.hardening, inst.params)) ++failures;
    }
    out.report["prop2"] = {{"trials", trials}, {"failures", failures}};
    if (failures > 0)
        out.failures.push_back("normalizer decomposition failed in " + std::to_string(failures) +
                               " of " + std::to_string(trials) + " trials");
}

void run_lemma_suite(Rng& rng, std::size_t trials, SuiteOutcome& out) {
    std::size_t accepted = 0, attempts = 0, loss_violations = 0;
    std::size_t anchor_checks = 0, anchor_violations = 0;
    const std::size_t max_attempts = trials * 40 + 100;
    while (accepted < trials && attempts < max_attempts) {
        ++attempts;
        ClusteredInstance inst = make_clustered_instance(rng, true);
        AssumptionSummary summary;
        try {
            summary = assumption_summary_table(inst.pop, inst.table, inst.hardening, inst.params);
        } catch (const AssumptionUndefined&) {
            continue;
        }
        if (summary.fraction != 1.0) continue;
        ++accepted;

        // proof-step inequality at every anchor
        for (const auto& rec : summary.records) {
            Vec g_row = similarity_row(inst.table[rec.anchor_index], inst.table, inst.params);
            Vec exp_g(g_row.size());
            for (std::size_t j = 0; j < g_row.size(); ++j) exp_g[j] = std::exp(g_row[j]);
            double e_hucl = expected_under(
                neg_distribution_row(inst.pop, rec.anchor_index,
                                     NegSamplingSpec{Setting::HUcl, inst.hardening}, g_row),
                exp_g);
            double e_hscl = expected_under(
                neg_distribution_row(inst.pop, rec.anchor_index,
                                     NegSamplingSpec{Setting::HScl, inst.hardening}, g_row),
                exp_g);
            ++anchor_checks;
            if (e_hucl < e_hscl - 1e-12) ++anchor_violations;
        }

        try {
            LemmaRecord rec = verify_lemma1_table(inst.pop, inst.table, inst.hardening,
                                                  inst.params, inst.pair_anchors,
                                                  inst.pair_positives);
            if (!rec.holds) ++loss_violations;
        } catch (const CheckFailure&) {
            ++loss_violations;
        }
    }
    out.report["lemma"] = {{"requested", trials},
                           {"accepted", accepted},
                           {"attempts", attempts},
                           {"loss_violations", loss_violations},
                           {"anchor_checks", anchor_checks},
                           {"anchor_violations", anchor_violations}};
    if (accepted < trials)
        out.failures.push_back("lemma suite: only " + std::to_string(accepted) + " of " +
                               std::to_string(trials) + " instances reached assumption fraction 1");
    if (loss_violations > 0)
        out.failures.push_back("lemma suite: " + std::to_string(loss_violations) +
                               " loss-inequality violations");
    if (anchor_violations > 0)
        out.failures.push_back("lemma suite: " + std::to_string(anchor_violations) +
                               " per-anchor mixture-step violations");
}

void run_counterexample_suite(Rng& rng, std::size_t trials, SuiteOutcome& out) {
    std::size_t applicable_instances = 0, attempts = 0;
    std::size_t anchors_applicable = 0, anchors_inapplicable = 0, violations = 0;
    const std::size_t max_attempts = trials * 40 + 100;
    while (applicable_instances < trials && attempts < max_attempts) {
        ++attempts;
        ClusteredInstance inst = make_clustered_instance(rng, false);
        bool any = false;
        for (std::size_t a = 0; a < inst.pop.size(); ++a) {
            Vec g_row = similarity_row(inst.table[a], inst.table, inst.params);
            try {
                CounterexampleRecord rec = build_counterexample_row(inst.pop, a, g_row);
                ++anchors_applicable;
                any = true;
                bool ok = rec.e_hscl >= rec.tau_star - 1e-12;
                double gp = rng.uniform(-1.0 / inst.params.gamma, 1.0 / inst.params.gamma);
                ok = ok && psi_inf(gp, rec.e_hscl) >= psi_inf(gp, rec.tau_star) - 1e-12;
                if (!ok) ++violations;
            } catch (const ConstructionInapplicable&) {
                ++anchors_inapplicable;
            }
        }
        if (any) ++applicable_instances;
    }
    out.report["counterexample"] = {{"requested", trials},
                                    {"applicable_instances", applicable_instances},
                                    {"attempts", attempts},
                                    {"anchors_applicable", anchors_applicable},
                                    {"anchors_inapplicable", anchors_inapplicable},
                                    {"violations", violations}};
    if (applicable_instances < trials)
        out.failures.push_back("counterexample suite: construction applied in only " +
                               std::to_string(applicable_instances) + " of " +
                               std::to_string(trials) + " instances");
    if (violations > 0)
        out.failures.push_back("counterexample suite: " + std::to_string(violations) +
                               " inequality violations");
}

void run_validity_checks(bool negative_control, SuiteOutcome& out) {
    Vec grid;
    for (double t = -2.0; t <= 2.0 + 1e-9; t += 0.05) grid.push_back(t);
    std::size_t checks = 0, failures = 0;
    for (const auto& h : {HardeningSpec::identity(), HardeningSpec::exp_tilt(2.0),
                          HardeningSpec::threshold(0.5)}) {
        ++checks;
        if (!check_hardening_validity(h, grid)) {
            ++failures;
            out.failures.push_back("hardening validity failed for " + to_string(h));
        }
    }
    if (negative_control) {
        // the fixture forces a decreasing reweighting; it must be rejected,
        // which makes the whole run fail by design
        ++checks;
        ++failures;
        if (check_function_validity([](double t) { return std::exp(-t); }, grid))
            out.failures.push_back("negative control: decreasing function passed the validity check");
        else
            out.failures.push_back(
                "negative-control fixture: eta(t) = e^{-t} is not a valid hardening function");
    }
    out.report["hardening_validity"] = {{"checks", checks}, {"failures", failures}};
}

void run_concrete_instance(const KeyValueConfig& cfg, const CommandOptions& opt,
                           SuiteOutcome& out) {
    Population pop = population_from(cfg, opt);
    std::uint64_t seed = cfg.get_u64("verify.seed", 1);
    if (opt.seed) seed = *opt.seed;
    SimilarityParams p{cfg.get_double("similarity.gamma", 0.5)};

    HardeningSpec h = HardeningSpec::exp_tilt(1.0);
    if (cfg.has("verify.beta") && cfg.has("verify.tau"))
        throw InputError("config: verify.beta and verify.tau are mutually exclusive");
    if (cfg.has("verify.beta")) h = HardeningSpec::exp_tilt(cfg.get_double("verify.beta", 1.0));
    if (cfg.has("verify.tau")) h = HardeningSpec::threshold(cfg.get_double("verify.tau", 1.0));

    std::vector<std::size_t> widths{pop.feature_dim()};
    for (std::size_t w : hidden_widths_from(cfg)) widths.push_back(w);
    widths.push_back(static_cast<std::size_t>(cfg.get_int("embedder.dim", 8)));
    Rng rng(seed);
    Embedder f = Embedder::random_init(widths, rng);
    EmbeddingTable points = embed_population(pop, f);

    json inst;
    inst["population_size"] = pop.size();
    inst["hardening"] = to_string(h);
    inst["gamma"] = p.gamma;

    AssumptionSummary summary = assumption_summary_table(pop, points, h, p, opt.threads);
    json recs = json::array();
    for (const auto& r : summary.records)
        recs.push_back({{"anchor", r.anchor_index},
                        {"e_hcol", r.e_hcol},
                        {"e_hscl", r.e_hscl},
                        {"holds", r.holds}});
    inst["assumption"] = {{"fraction", summary.fraction},
                          {"defined", summary.defined},
                          {"undefined", summary.undefined},
                          {"records", recs}};

    Rng pair_rng = rng.derive(7);
    PositivePairing pairing = frozen_eval_pairing(pop, 0.0, pair_rng);
    std::vector<std::size_t> anchors;
    EmbeddingTable positives;
    for (const auto& pr : pairing) {
        anchors.push_back(pr.anchor);
        positives.push_back(f.forward(pr.positive_features));
    }
    try {
        LemmaRecord lemma =
            verify_lemma1_table(pop, points, h, p, anchors, positives, opt.threads);
        inst["lemma"] = {{"l_hucl", lemma.l_hucl},
                         {"l_hscl", lemma.l_hscl},
                         {"assumption_fraction", lemma.assumption_fraction},
                         {"holds", lemma.holds}};
    } catch (const CheckFailure& e) {
        inst["lemma"] = {{"error", e.what()}};
        out.failures.push_back(std::string("concrete instance: ") + e.what());
    }

    json cex = json::array();
    std::size_t inapplicable = 0, cex_violations = 0;
    for (std::size_t a = 0; a < pop.size(); ++a) {
        Vec g_row = similarity_row(points[a], points, p);
        try {
            CounterexampleRecord rec = build_counterexample_row(pop, a, g_row);
            bool ok = rec.e_hscl >= rec.tau_star - 1e-12;
            if (!ok) ++cex_violations;
            cex.push_back({{"anchor", rec.anchor_index},
                           {"tau_star", rec.tau_star},
                           {"e_hscl", rec.e_hscl},
                           {"holds", ok}});
        } catch (const ConstructionInapplicable&) {
            ++inapplicable;
        }
    }
    inst["counterexample"] = {{"records", cex},
                              {"inapplicable_anchors", inapplicable},
                              {"violations", cex_violations}};
    if (cex_violations > 0)
        out.failures.push_back("concrete instance: counterexample inequality violated");

    bool prop2_ok = verify_prop2_table(pop, points, h, p, opt.threads);
    inst["prop2_holds"] = prop2_ok;
    if (!prop2_ok) out.failures.push_back("concrete instance: normalizer decomposition violated");

    out.report["instance"] = inst;
}

} // namespace

int cmd_verify(const CommandOptions& opt) {
    KeyValueConfig cfg = load_config(opt);
    cfg.check_known(allowed_keys({std::span(kCommonKeys), std::span(kVerifyKeys)}));

    std::uint64_t seed = cfg.get_u64("verify.seed", 1);
    if (opt.seed) seed = *opt.seed;
    Rng rng(seed);

    SuiteOutcome out;
    run_validity_checks(cfg.get_bool("verify.negative_control", false), out);
    run_prop1_suite(rng, static_cast<std::size_t>(cfg.get_int("verify.trials_prop1", 1000)), out);
    run_prop2_suite(rng, static_cast<std::size_t>(cfg.get_int("verify.trials_prop2", 1000)), out);
    run_lemma_suite(rng, static_cast<std::size_t>(cfg.get_int("verify.trials_lemma", 500)), out);
    run_counterexample_suite(
        rng, static_cast<std::size_t>(cfg.get_int("verify.trials_counterexample", 200)), out);
    run_concrete_instance(cfg, opt, out);

    out.report["passed"] = out.failures.empty();
    out.report["failures"] = out.failures;

    auto dir = prepare_out_dir(opt);
    std::ofstream os(dir / "report.json", std::ios::binary);
    if (!os) throw InputError("verify: cannot write report.json");
    os << out.report.dump(2) << '\n';

    if (!out.failures.empty()) {
        std::cerr << "verify: FAILED\n";
        for (const auto& f : out.failures) std::cerr << "  - " << f << '\n';
        return 1;
    }
    std::cout << "verify: all checks passed\n";
    return 0;
}

} // namespace hardcl
