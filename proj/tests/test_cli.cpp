// Drives the installed binary end to end through std::system, checking the
// exit-code contract: 0 success, 1 failed checks, 2 usage and config errors.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "swat/csv.hpp"
#include "swat/image_io.hpp"

using namespace swat;

namespace {

struct RunOut {
    int rc = -1;
    std::string out;
    std::string err;
};

std::string temp_name(const std::string& stem) {
    static int counter = 0;
    return (std::filesystem::temp_directory_path() /
            (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++)))
        .string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) return "";
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

RunOut run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string base = temp_name("swat_cli");
    const std::string out_path = base + ".out";
    const std::string err_path = base + ".err";
    const std::string cmd =
        env_prefix + SWAT_CLI_PATH + " " + args + " > " + out_path + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    RunOut r;
    r.rc = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    std::remove(out_path.c_str());
    std::remove(err_path.c_str());
    return r;
}

std::string write_file(const std::string& stem, const std::string& content) {
    const std::string path = temp_name(stem) + ".json";
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

const char* kTrainConfig = R"({
    "seed": 5,
    "model": { "variant": "mixer", "depth": 1, "embed": 8, "token_hidden": 4,
               "channel_hidden": 8, "patch": 4, "alpha": 1, "image_size": 8,
               "classes": 2, "pos_emb": false },
    "dataset": { "n_samples": 16, "period": 2, "noise": 0.1, "seed": 13 },
    "optimizer": { "lr": 0.003, "epochs": 2, "batch": 8 }
})";

const char* kProbeConfig = R"({
    "seed": 3,
    "model": { "variant": "transformer", "depth": 2, "embed": 16, "heads": 2,
               "patch": 4, "alpha": 2, "image_size": 16, "classes": 5,
               "pos_emb": true, "swat": true, "token_mix_kernel": 3,
               "channel_mix_kernel": 3 },
    "dataset": { "period": 2, "noise": 0.1, "seed": 21 }
})";

}  // namespace

TEST_CASE("count prints the table and honors the csv flag") {
    RunOut r = run_cli("count --preset deit-ti");
    CHECK(r.rc == 0);
    CHECK(r.out.find("tokenizer") != std::string::npos);
    CHECK(r.out.find("total") != std::string::npos);
    CHECK(r.out.find("5717032") != std::string::npos);  // 5.72M parameters

    const std::string csv = temp_name("swat_count") + ".csv";
    RunOut rc = run_cli("count --preset deit-ti --csv " + csv);
    CHECK(rc.rc == 0);
    auto rows = parse_csv(slurp(csv));
    REQUIRE(rows.size() > 2);
    CHECK(rows[0] == std::vector<std::string>{"component", "params", "flops"});
    CHECK(rows.back()[0] == "total");
    CHECK(rows.back()[1] == "5717032");
    std::remove(csv.c_str());
}

TEST_CASE("count needs exactly one model source") {
    CHECK(run_cli("count").rc == 2);
    const std::string cfg = write_file("swat_count_cfg", R"({ "model": { "preset": "deit-ti" } })");
    CHECK(run_cli("count --config " + cfg + " --preset deit-ti").rc == 2);
    RunOut r = run_cli("count --config " + cfg);
    CHECK(r.rc == 0);
    CHECK(r.out.find("5717032") != std::string::npos);
    std::remove(cfg.c_str());
}

TEST_CASE("check passes clean and fails when sabotaged") {
    const std::string csv = temp_name("swat_check") + ".csv";
    RunOut ok = run_cli("check --suite equiv --seed 3 --csv " + csv);
    CHECK(ok.rc == 0);
    CHECK(ok.out.find("[PASS]") != std::string::npos);
    CHECK(ok.out.find("[FAIL]") == std::string::npos);
    auto rows = parse_csv(slurp(csv));
    REQUIRE(rows.size() == 9);  // header + eight oracle pairs
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][1] == "pass");
    std::remove(csv.c_str());

    RunOut bad = run_cli("check --suite grads --seed 3 --inject-fault");
    CHECK(bad.rc == 1);
    CHECK(bad.out.find("[FAIL]") != std::string::npos);

    CHECK(run_cli("check --suite nonsense").rc == 2);
}

TEST_CASE("train runs, logs history, and is reproducible process to process") {
    const std::string cfg = write_file("swat_train_cfg", kTrainConfig);
    const std::string h1 = temp_name("swat_hist") + ".csv";
    const std::string h2 = temp_name("swat_hist") + ".csv";

    RunOut a = run_cli("train --config " + cfg + " --out-history " + h1);
    CHECK(a.rc == 0);
    CHECK(a.out.find("epoch   0") != std::string::npos);
    CHECK(a.out.find("best epoch") != std::string::npos);

    RunOut b = run_cli("train --config " + cfg + " --out-history " + h2);
    CHECK(b.rc == 0);
    const std::string bytes1 = slurp(h1);
    CHECK(bytes1 == slurp(h2));
    auto rows = parse_csv(bytes1);
    REQUIRE(rows.size() == 3);  // header + two epochs
    CHECK(rows[0] == std::vector<std::string>{"epoch", "loss", "accuracy"});
    CHECK(std::stod(rows[1][1]) > 0.0);

    // --seed beats SWAT_SEED; SWAT_SEED beats the config seed
    RunOut plain = run_cli("train --config " + cfg);
    RunOut flag = run_cli("train --config " + cfg + " --seed 5", "SWAT_SEED=9 ");
    CHECK(flag.rc == 0);
    CHECK(flag.out == plain.out);
    RunOut env = run_cli("train --config " + cfg, "SWAT_SEED=9 ");
    CHECK(env.rc == 0);
    CHECK(env.out != plain.out);

    std::remove(cfg.c_str());
    std::remove(h1.c_str());
    std::remove(h2.c_str());
}

TEST_CASE("train rejects a config whose halves disagree") {
    const std::string cfg = write_file("swat_train_bad", R"({
        "model": { "variant": "mixer", "depth": 1, "embed": 8, "token_hidden": 4,
                   "channel_hidden": 8, "patch": 4, "alpha": 1, "image_size": 8,
                   "classes": 2, "pos_emb": false },
        "dataset": { "classes": 5 }
    })");
    CHECK(run_cli("train --config " + cfg).rc == 2);
    std::remove(cfg.c_str());

    CHECK(run_cli("train").rc == 2);  // --config is required
    CHECK(run_cli("train --config /no/such.json").rc == 2);
}

TEST_CASE("probe reports deviations and dumps attention maps") {
    const std::string cfg = write_file("swat_probe_cfg", kProbeConfig);
    const std::string dir = temp_name("swat_probe_out");

    RunOut r = run_cli("probe --config " + cfg + " --synthetic --perms 3 --attn-layer -1 --out " +
                       dir);
    CHECK(r.rc == 0);
    CHECK(r.out.find("tokens 16 (4x4)") != std::string::npos);
    CHECK(r.out.find("max deviation") != std::string::npos);
    ImageU8 img = read_netpbm(dir + "/attention.pgm");
    CHECK(img.width == 4);
    CHECK(img.height == 4);
    CHECK(img.channels == 1);

    // deterministic across runs: same bytes
    const std::string first = slurp(dir + "/attention.pgm");
    RunOut again = run_cli("probe --config " + cfg + " --synthetic --perms 0 --attn-layer -1 " +
                           "--out " + dir);
    CHECK(again.rc == 0);
    CHECK(slurp(dir + "/attention.pgm") == first);

    std::filesystem::remove_all(dir);
    std::remove(cfg.c_str());
}

TEST_CASE("probe accepts real images only when the grid divides") {
    const std::string cfg = write_file("swat_probe_img_cfg", kProbeConfig);

    Tensor ramp = Tensor::zeros({8, 8});
    for (int i = 0; i < 64; ++i) ramp.values()[static_cast<std::size_t>(i)] = i;
    const std::string good = temp_name("swat_probe_in") + ".pgm";
    write_pgm(good, gray_map_to_u8(ramp));
    RunOut ok = run_cli("probe --config " + cfg + " --image " + good + " --perms 2");
    CHECK(ok.rc == 0);
    CHECK(ok.out.find("tokens 4 (2x2)") != std::string::npos);

    Tensor odd = Tensor::zeros({10, 10});
    for (int i = 0; i < 100; ++i) odd.values()[static_cast<std::size_t>(i)] = i;
    const std::string bad = temp_name("swat_probe_bad") + ".pgm";
    write_pgm(bad, gray_map_to_u8(odd));
    CHECK(run_cli("probe --config " + cfg + " --image " + bad + " --perms 1").rc == 2);

    CHECK(run_cli("probe --config " + cfg + " --perms 1").rc == 2);  // no input selected
    CHECK(run_cli("probe --config " + cfg + " --image " + good + " --synthetic").rc == 2);

    std::remove(good.c_str());
    std::remove(bad.c_str());
    std::remove(cfg.c_str());
}

TEST_CASE("probe refuses attention dumps from mixers") {
    const std::string cfg = write_file("swat_probe_mixer", R"({
        "model": { "preset": "tiny-mixer-swat" },
        "dataset": { "seed": 21 }
    })");
    CHECK(run_cli("probe --config " + cfg + " --synthetic --perms 1 --attn-layer 0").rc == 2);
    RunOut r = run_cli("probe --config " + cfg + " --synthetic --perms 1");
    CHECK(r.rc == 0);  // the permutation half still works
    std::remove(cfg.c_str());
}

TEST_CASE("usage and config failures exit 2") {
    CHECK(run_cli("").rc == 2);
    CHECK(run_cli("bogus").rc == 2);
    CHECK(run_cli("count --preset not-a-preset").rc == 2);
    CHECK(run_cli("check --suite equiv", "SWAT_SEED=notanumber ").rc == 2);
    const std::string broken = write_file("swat_broken", "{ not json");
    CHECK(run_cli("count --config " + broken).rc == 2);
    std::remove(broken.c_str());
    CHECK(run_cli("--help").rc == 0);
}
