// Command-line workbench: parameter/FLOP accounting, the verification
// suites, the synthetic training demo, and single-image probes.
//
// Exit codes: 0 success, 1 failed checks or runtime errors, 2 usage errors
// (bad flags, malformed configs, unreadable files).

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "swat/complexity.hpp"
#include "swat/config.hpp"
#include "swat/csv.hpp"
#include "swat/image_io.hpp"
#include "swat/presets.hpp"
#include "swat/trainer.hpp"
#include "swat/verify.hpp"

namespace {

using namespace swat;

// --seed beats SWAT_SEED beats the config's own seed.
uint64_t resolve_seed(bool flag_given, uint64_t flag_value, uint64_t config_seed) {
    if (flag_given) return flag_value;
    if (const char* env = std::getenv("SWAT_SEED")) {
        errno = 0;
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (errno != 0 || end == env || *end != '\0') {
            throw ConfigError("SWAT_SEED must be an unsigned integer, got '" + std::string(env) +
                              "'");
        }
        return v;
    }
    return config_seed;
}

std::vector<int64_t> random_permutation(int64_t n, std::mt19937_64& rng) {
    std::vector<int64_t> perm(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int64_t i = n - 1; i > 0; --i) {
        const int64_t j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

int cmd_count(const ModelConfig& model, int input_size, const std::string& csv_path) {
    const ComplexityReport rep =
        input_size > 0 ? count_model(model, input_size) : count_model(model);

    std::printf("%-36s %14s %16s\n", "component", "params", "flops");
    for (const auto& row : rep.rows) {
        std::printf("%-36s %14lld %16lld\n", row.path.c_str(),
                    static_cast<long long>(row.params), static_cast<long long>(row.flops));
    }
    std::printf("%-36s %14lld %16lld\n", "total", static_cast<long long>(rep.total_params),
                static_cast<long long>(rep.total_flops));
    std::printf("counting convention: %s\n", rep.counting_convention.c_str());

    if (!csv_path.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& row : rep.rows) {
            rows.push_back({row.path, std::to_string(row.params), std::to_string(row.flops)});
        }
        rows.push_back({"total", std::to_string(rep.total_params),
                        std::to_string(rep.total_flops)});
        write_csv(csv_path, {"component", "params", "flops"}, rows);
        std::printf("wrote %s\n", csv_path.c_str());
    }
    return 0;
}

int cmd_check(const std::string& suite, uint64_t seed, const std::string& csv_path,
              bool inject_fault) {
    const GradFault fault = inject_fault ? GradFault::corrupt : GradFault::none;
    std::vector<CheckReport> reports;
    if (suite == "grads" || suite == "all") {
        auto r = run_grad_suite(seed, fault);
        reports.insert(reports.end(), r.begin(), r.end());
    }
    if (suite == "equiv" || suite == "all") {
        auto r = run_equivalence_suite(seed);
        reports.insert(reports.end(), r.begin(), r.end());
    }
    if (suite == "perm" || suite == "all") {
        auto r = run_permutation_suite(seed);
        reports.insert(reports.end(), r.begin(), r.end());
    }

    int failed = 0;
    for (const auto& r : reports) {
        if (!r.pass) ++failed;
        std::printf("[%s] %-32s worst %.3e  tol %.3e%s%s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.worst_case, r.tolerance, r.detail.empty() ? "" : "  ",
                    r.detail.c_str());
    }
    std::printf("%zu checks, %d failed (seed %llu)\n", reports.size(), failed,
                static_cast<unsigned long long>(seed));
    if (!csv_path.empty()) {
        write_reports_csv(csv_path, reports);
        std::printf("wrote %s\n", csv_path.c_str());
    }
    return failed == 0 ? 0 : 1;
}

int cmd_train(const RunConfig& run, uint64_t seed, const std::string& history_path) {
    if (run.dataset.classes > run.model.classes) {
        throw ConfigError("dataset has " + std::to_string(run.dataset.classes) +
                          " classes but the head only " + std::to_string(run.model.classes));
    }
    if (run.dataset.image_size != run.model.image_size) {
        throw ConfigError("dataset image size " + std::to_string(run.dataset.image_size) +
                          " does not match the model's " + std::to_string(run.model.image_size));
    }
    if (run.dataset.channels != run.model.in_channels) {
        throw ConfigError("dataset channels " + std::to_string(run.dataset.channels) +
                          " do not match the model's " + std::to_string(run.model.in_channels));
    }

    const Dataset data = make_synthetic_dataset(run.dataset);
    Model m = build_model(run.model, seed);
    const TrainResult result = train(m, data, run.optimizer, seed);

    for (std::size_t e = 0; e < result.history.size(); ++e) {
        std::printf("epoch %3zu  loss %.6f  accuracy %.4f\n", e, result.history[e].loss,
                    result.history[e].accuracy);
    }
    std::printf("best epoch %d  accuracy %.4f\n", result.best_epoch,
                result.history[static_cast<std::size_t>(result.best_epoch)].accuracy);

    if (!history_path.empty()) {
        std::vector<std::vector<std::string>> rows;
        for (std::size_t e = 0; e < result.history.size(); ++e) {
            rows.push_back({std::to_string(e), format_double(result.history[e].loss),
                            format_double(result.history[e].accuracy)});
        }
        write_csv(history_path, {"epoch", "loss", "accuracy"}, rows);
        std::printf("wrote %s\n", history_path.c_str());
    }
    return 0;
}

int cmd_probe(const RunConfig& run, const std::string& image_path, bool synthetic, int perms,
              bool want_attention, int attn_layer, const std::string& out_dir, uint64_t seed) {
    ModelConfig cfg = run.model;
    Tensor input;
    if (!image_path.empty()) {
        const ImageU8 img = read_netpbm(image_path);
        if (img.width != img.height) {
            throw ConfigError("probe images must be square, got " + std::to_string(img.width) +
                              "x" + std::to_string(img.height));
        }
        cfg.image_size = img.width;
        input = image_to_tensor(img, cfg.in_channels);
    } else {
        if (!synthetic) throw ConfigError("probe needs --image or --synthetic");
        DatasetSpec spec = run.dataset;
        spec.n_samples = 1;
        spec.channels = cfg.in_channels;
        cfg.image_size = spec.image_size;
        input = make_synthetic_dataset(spec).images;
    }
    if (cfg.image_size < cfg.patch || cfg.image_size % cfg.patch != 0) {
        throw ConfigError("image side " + std::to_string(cfg.image_size) +
                          " is not a multiple of patch " + std::to_string(cfg.patch));
    }

    const Model m = build_model(cfg, seed);
    const TokenGrid grid = m.tokenize(input);
    std::printf("tokens %lld (%lldx%lld), embed %d\n", static_cast<long long>(grid.tokens_n()),
                static_cast<long long>(grid.ht()), static_cast<long long>(grid.wt()), cfg.embed);

    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (int i = 0; i < perms; ++i) {
        const double dev =
            token_permutation_deviation(m, grid, random_permutation(grid.tokens_n(), rng));
        worst = std::max(worst, dev);
        std::printf("perm %2d  logit deviation %.6e\n", i, dev);
    }
    if (perms > 0) std::printf("max deviation %.6e\n", worst);

    if (want_attention) {
        if (cfg.variant != Variant::transformer) {
            throw ConfigError("attention maps need the transformer variant");
        }
        if (attn_layer < -1 || attn_layer >= cfg.depth) {
            throw ConfigError("attention layer " + std::to_string(attn_layer) +
                              " outside depth " + std::to_string(cfg.depth));
        }
        std::filesystem::create_directories(out_dir);
        const std::string path = (std::filesystem::path(out_dir) / "attention.pgm").string();
        attention_dump(m, input, attn_layer, path);
        std::printf("wrote %s\n", path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structure-aware tokenization and mixing workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::string preset_name;
    std::string csv_path;
    int input_size = 0;
    auto* count_cmd = app.add_subcommand("count", "parameter and FLOP accounting");
    count_cmd->add_option("--config", config_path, "run config (JSON)");
    count_cmd->add_option("--preset", preset_name, "named preset instead of a config");
    count_cmd->add_option("--input-size", input_size, "evaluate FLOPs at this input side");
    count_cmd->add_option("--csv", csv_path, "also write the table as CSV");

    std::string suite = "all";
    uint64_t seed_value = 0;
    bool inject_fault = false;
    auto* check_cmd = app.add_subcommand("check", "gradient, equivalence, permutation suites");
    check_cmd->add_option("--suite", suite, "grads | equiv | perm | all")
        ->check(CLI::IsMember({"grads", "equiv", "perm", "all"}));
    auto* check_seed = check_cmd->add_option("--seed", seed_value, "probe seed");
    check_cmd->add_option("--csv", csv_path, "write the reports as CSV");
    check_cmd->add_flag("--inject-fault", inject_fault)->group("");

    std::string history_path;
    auto* train_cmd = app.add_subcommand("train", "fit a model on the synthetic stripe task");
    train_cmd->add_option("--config", config_path, "run config (JSON)")->required();
    auto* train_seed = train_cmd->add_option("--seed", seed_value, "init and shuffle seed");
    train_cmd->add_option("--out-history", history_path, "write per-epoch CSV here");

    std::string image_path;
    std::string out_dir = ".";
    bool synthetic = false;
    int perms = 8;
    int attn_layer = -1;
    auto* probe_cmd = app.add_subcommand("probe", "permutation and attention probes on one image");
    probe_cmd->add_option("--config", config_path, "run config (JSON)")->required();
    auto* img_opt = probe_cmd->add_option("--image", image_path, "PGM (P5) or PPM (P6) input");
    probe_cmd->add_flag("--synthetic", synthetic, "use one synthetic stripe sample")
        ->excludes(img_opt);
    probe_cmd->add_option("--perms", perms, "token permutations to try")
        ->check(CLI::NonNegativeNumber);
    auto* attn_opt =
        probe_cmd->add_option("--attn-layer", attn_layer, "dump this layer's attention (-1: last)");
    probe_cmd->add_option("--out", out_dir, "directory for dumped maps");
    auto* probe_seed = probe_cmd->add_option("--seed", seed_value, "model init seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*count_cmd) {
            if (config_path.empty() == preset_name.empty()) {
                throw ConfigError("count needs exactly one of --config or --preset");
            }
            const ModelConfig model =
                preset_name.empty() ? load_run_config(config_path).model : preset(preset_name);
            return cmd_count(model, input_size, csv_path);
        }
        if (*check_cmd) {
            const uint64_t seed = resolve_seed(check_seed->count() > 0, seed_value, 0);
            return cmd_check(suite, seed, csv_path, inject_fault);
        }
        if (*train_cmd) {
            const RunConfig run = load_run_config(config_path);
            const uint64_t seed = resolve_seed(train_seed->count() > 0, seed_value, run.seed);
            return cmd_train(run, seed, history_path);
        }
        const RunConfig run = load_run_config(config_path);
        const uint64_t seed = resolve_seed(probe_seed->count() > 0, seed_value, run.seed);
        return cmd_probe(run, image_path, synthetic, perms, attn_opt->count() > 0, attn_layer,
                         out_dir, seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
