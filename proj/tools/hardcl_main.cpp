#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "hardcl/commands.hpp"
#include "hardcl/errors.hpp"

namespace {

void add_common(CLI::App* cmd, hardcl::CommandOptions& opt, std::optional<long long>& seed_raw) {
    cmd->add_option("--config", opt.config_path, "key=value configuration file");
    cmd->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", seed_raw, "override every configured seed");
    cmd->add_option("--threads", opt.threads, "worker cap for per-anchor evaluation")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hard-negative contrastive learning: generation, training and verification"};
    app.require_subcommand(1);

    hardcl::CommandOptions opt;
    std::optional<long long> seed_raw;

    auto* verify = app.add_subcommand("verify", "run the randomized verification suites");
    auto* train = app.add_subcommand("train", "train one setting and write history/weights");
    auto* compare = app.add_subcommand("compare", "train the settings across seeds and tabulate");
    auto* makedata = app.add_subcommand("make-data", "generate a mixture population CSV");
    for (auto* cmd : {verify, train, compare, makedata}) add_common(cmd, opt, seed_raw);

    CLI11_PARSE(app, argc, argv);
    if (seed_raw) {
        if (*seed_raw < 0) {
            std::cerr << "error: --seed must be nonnegative\n";
            return 2;
        }
        opt.seed = static_cast<std::uint64_t>(*seed_raw);
    }

    try {
        if (verify->parsed()) return hardcl::cmd_verify(opt);
        if (train->parsed()) return hardcl::cmd_train(opt);
        if (compare->parsed()) return hardcl::cmd_compare(opt);
        if (makedata->parsed()) return hardcl::cmd_make_data(opt);
        return 2;
    } catch (const hardcl::CheckFailure& e) {
        std::cerr << "check failure: " << e.what() << '\n';
        return 1;
    } catch (const hardcl::NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return 3;
    } catch (const hardcl::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const hardcl::ZeroMassError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
