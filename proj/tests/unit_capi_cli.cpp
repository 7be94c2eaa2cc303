#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cfe/cfe.h>

#include "support/synth.hpp"
#include "support/testenv.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string write_config(const std::string& dir, const std::string& body) {
    const std::string path = dir + "/config.json";
    std::ofstream f(path);
    f << body;
    return path;
}

std::string desk_config_json(const std::string& raw_dir, const std::string& target_dir,
                             const std::string& out_root, int epochs,
                             const std::string& variant = "CE") {
    std::ostringstream os;
    os << R"({
  "seed": 4242,
  "output_root": ")" << out_root << R"(",
  "variant": ")" << variant << R"(",
  "dataset": {"raw_dir": ")" << raw_dir << R"(", "target_dir": ")" << target_dir
       << R"(", "longer_edge": 16, "pad_size": 16, "val_count": 2},
  "train": {"batch_size": 8, "epochs": )" << epochs << R"(},
  "cenet": {"backbone_channels": [8, 16], "head_widths": [16]},
  "prnet": {"base_channels": 8}
})";
    return os.str();
}

struct Owned {
    char* s = nullptr;
    ~Owned() { cfe_string_free(s); }
};

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f), {});
}

int run_cli(const std::string& args, const std::string& capture_to = "") {
    std::string cmd = std::string(CFE_CLI_PATH) + " " + args;
    if (!capture_to.empty())
        cmd += " > " + capture_to + " 2>&1";
    else
        cmd += " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string file_text(const std::string& path) {
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("version and error-string plumbing") {
    CHECK(std::string(cfe_version()) == "1.0.0");
    cfe_run* run = nullptr;
    CHECK(cfe_run_open("/definitely/not/a/file.json", &run) == CFE_ERR_IO);
    CHECK(run == nullptr);
    CHECK(std::string(cfe_last_error()).find("cannot open") != std::string::npos);
    CHECK(cfe_run_open(nullptr, &run) == CFE_ERR_USAGE);
}

TEST_CASE("config errors carry the offending key through the C API") {
    const std::string dir = testenv::scratch_dir("capi_config");
    const std::string bad = write_config(dir, R"({"learningrate": 0.1})");
    cfe_run* run = nullptr;
    CHECK(cfe_run_open(bad.c_str(), &run) == CFE_ERR_CONFIG);
    CHECK(std::string(cfe_last_error()).find("learningrate") != std::string::npos);

    const std::string ok = write_config(dir, "{}");
    REQUIRE(cfe_run_open(ok.c_str(), &run) == CFE_OK);
    CHECK(cfe_run_set(run, "train.lr_init", "0.1") == CFE_ERR_CONFIG);
    CHECK(std::string(cfe_last_error()).find("train.lr_init") != std::string::npos);
    CHECK(cfe_run_set(run, "train.epochs", "3") == CFE_OK);
    cfe_run_close(run);
}

TEST_CASE("train, evaluate and enhance through the C API") {
    const std::string dir = testenv::scratch_dir("capi_flow");
    synth::make_affine_set(dir + "/raw", dir + "/target", 6, 16, 91);
    const std::string cfg_path =
        write_config(dir, desk_config_json(dir + "/raw", dir + "/target", dir + "/runs", 40));

    cfe_run* run = nullptr;
    REQUIRE(cfe_run_open(cfg_path.c_str(), &run) == CFE_OK);
    Owned summary;
    REQUIRE(cfe_run_train(run, nullptr, nullptr, &summary.s) == CFE_OK);
    CHECK(std::string(summary.s).find("cenet") != std::string::npos);
    Owned run_dir;
    REQUIRE(cfe_run_dir(run, &run_dir.s) == CFE_OK);
    const std::string rd = run_dir.s;
    CHECK(fs::exists(rd + "/cenet.ckpt"));
    cfe_run_close(run);

    // evaluate against the produced checkpoints
    cfe_run* eval = nullptr;
    REQUIRE(cfe_run_open(cfg_path.c_str(), &eval) == CFE_OK);
    REQUIRE(cfe_run_set(eval, "checkpoint_dir", rd.c_str()) == CFE_OK);
    Owned table;
    REQUIRE(cfe_run_evaluate(eval, nullptr, &table.s) == CFE_OK);
    CHECK(std::string(table.s).find("mean") != std::string::npos);
    cfe_run_close(eval);

    // enhance two images
    const std::string in1 = dir + "/raw/000.png";
    const std::string in2 = dir + "/raw/001.png";
    const char* inputs[2] = {in1.c_str(), in2.c_str()};
    REQUIRE(cfe_enhance(rd.c_str(), "CE", inputs, 2, (dir + "/enh").c_str()) == CFE_OK);
    CHECK(fs::exists(dir + "/enh/000_enhanced.png"));
    CHECK(fs::exists(dir + "/enh/001_enhanced.png"));

    // data errors surface as CFE_ERR_DATA
    CHECK(cfe_enhance((dir + "/nowhere").c_str(), "CE", inputs, 2, (dir + "/enh2").c_str()) ==
          CFE_ERR_DATA);
}

TEST_CASE("seeded runs through the C API are bit-reproducible") {
    const std::string dir = testenv::scratch_dir("capi_determinism");
    synth::make_affine_set(dir + "/raw", dir + "/target", 6, 16, 92);
    const std::string cfg_path =
        write_config(dir, desk_config_json(dir + "/raw", dir + "/target", dir + "/runs", 30));

    std::vector<std::string> dirs;
    for (int i = 0; i < 2; ++i) {
        cfe_run* run = nullptr;
        REQUIRE(cfe_run_open(cfg_path.c_str(), &run) == CFE_OK);
        REQUIRE(cfe_run_train(run, nullptr, nullptr, nullptr) == CFE_OK);
        Owned rd;
        REQUIRE(cfe_run_dir(run, &rd.s) == CFE_OK);
        dirs.push_back(rd.s);
        cfe_run_close(run);
    }
    CHECK(slurp(dirs[0] + "/cenet_loss.csv") == slurp(dirs[1] + "/cenet_loss.csv"));
    CHECK(slurp(dirs[0] + "/cenet.ckpt") == slurp(dirs[1] + "/cenet.ckpt"));
}

TEST_CASE("numeric failures map to CFE_ERR_NUMERIC") {
    const std::string dir = testenv::scratch_dir("capi_numeric");
    synth::make_affine_set(dir + "/raw", dir + "/target", 6, 16, 93);
    const std::string cfg_path =
        write_config(dir, desk_config_json(dir + "/raw", dir + "/target", dir + "/runs", 50));
    cfe_run* run = nullptr;
    REQUIRE(cfe_run_open(cfg_path.c_str(), &run) == CFE_OK);
    REQUIRE(cfe_run_set(run, "train.lr_initial", "1e9") == CFE_OK);
    CHECK(cfe_run_train(run, nullptr, nullptr, nullptr) == CFE_ERR_NUMERIC);
    CHECK(std::string(cfe_last_error()).find("diverged") != std::string::npos);
    cfe_run_close(run);
}

TEST_CASE("gradcheck scopes run through the C API") {
    Owned report;
    double max_err = 1.0;
    CHECK(cfe_gradcheck("op", &report.s, &max_err) == CFE_OK);
    CHECK(std::string(report.s).find("PASS") != std::string::npos);
    CHECK(max_err < 1e-3);
    CHECK(cfe_gradcheck("bogus", nullptr, nullptr) == CFE_ERR_USAGE);
}

TEST_CASE("cli: gradcheck, train, evaluate, enhance, ablate") {
    const std::string dir = testenv::scratch_dir("cli_flow");
    synth::make_affine_set(dir + "/raw", dir + "/target", 6, 16, 94);
    const std::string cfg_path = write_config(
        dir, desk_config_json(dir + "/raw", dir + "/target", dir + "/cli_runs", 20));

    CHECK(run_cli("gradcheck --scope op", dir + "/gradcheck.txt") == 0);
    CHECK(file_text(dir + "/gradcheck.txt").find("PASS") != std::string::npos);

    CHECK(run_cli("train " + cfg_path + " --variant CE", dir + "/train.txt") == 0);
    const std::string train_out = file_text(dir + "/train.txt");
    const auto pos = train_out.find("run_dir: ");
    REQUIRE(pos != std::string::npos);
    std::string run_dir = train_out.substr(pos + 9);
    run_dir = run_dir.substr(0, run_dir.find('\n'));
    CHECK(fs::exists(run_dir + "/cenet.ckpt"));

    CHECK(run_cli("evaluate " + cfg_path + " --checkpoint-dir " + run_dir,
                  dir + "/eval.txt") == 0);
    CHECK(file_text(dir + "/eval.txt").find("mean") != std::string::npos);

    CHECK(run_cli("enhance --checkpoint-dir " + run_dir + " --variant CE --out-dir " + dir +
                  "/enh " + dir + "/raw/000.png") == 0);
    CHECK(fs::exists(dir + "/enh/000_enhanced.png"));

    CHECK(run_cli("ablate " + cfg_path + " --set ablation.variants=[\\\"CE\\\"]",
                  dir + "/ablate.txt") == 0);
    CHECK(file_text(dir + "/ablate.txt").find("CE") != std::string::npos);
}

TEST_CASE("cli exit codes name the failure class") {
    const std::string dir = testenv::scratch_dir("cli_codes");
    const std::string bad = write_config(dir, R"({"learningrate": 1})");
    CHECK(run_cli("train " + bad) == 2); // config error

    const std::string missing_data = write_config(
        dir + "", desk_config_json(dir + "/nope", dir + "/nope2", dir + "/runs", 1));
    CHECK(run_cli("train " + missing_data) == 3); // data error

    synth::make_affine_set(dir + "/raw", dir + "/target", 6, 16, 95);
    const std::string diverge =
        write_config(dir, desk_config_json(dir + "/raw", dir + "/target", dir + "/runs", 50));
    CHECK(run_cli("train " + diverge + " --set train.lr_initial=1e9") == 4); // numeric
}
