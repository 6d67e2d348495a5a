#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& cli_path() {
    static const std::string path = [] {
        const char* env = std::getenv("PLUGID_CLI");
        return std::string(env != nullptr ? env : "");
    }();
    return path;
}

fs::path work_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "cli_suite";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path out_file = work_root() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err_file = work_root() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = "\"" + cli_path() + "\" " + args + " >" + out_file.string() + " 2>" +
                            err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    if (status != -1 && WIFEXITED(status)) {
        r.code = WEXITSTATUS(status);
    }
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// shared tiny corpus: 3 houses, 2 categories, 12 periods at 1200 Hz
const std::string& corpus_dir() {
    static const std::string dir = [] {
        const fs::path d = work_root() / "corpus";
        RunResult r = run_cli("synth --out " + d.string() +
                              " --houses 3 --instances 1 --periods 12 --fs 1200 --fg 60"
                              " --noise 0 --seed 7 --categories heater:resistive,motor:reactive");
        REQUIRE(r.code == 0);
        return d.string();
    }();
    return dir;
}

const std::string kQuick = " --epsilon 5 --hidden 4 --max-iters 30 --patience 10 --seed 5";

}  // namespace

TEST_CASE("cli refuses to run without a subcommand or required flags") {
    REQUIRE_FALSE(cli_path().empty());
    REQUIRE(run_cli("").code != 0);
    REQUIRE(run_cli("crossval").code != 0);  // --data is required
    REQUIRE(run_cli("frobnicate").code != 0);
}

TEST_CASE("synth writes a loadable corpus with a stable digest") {
    RunResult first = run_cli("synth --out " + (work_root() / "c1").string() +
                              " --houses 2 --instances 1 --periods 4 --fs 1200 --fg 60 --seed 9");
    REQUIRE(first.code == 0);
    REQUIRE(first.out.find("wrote 8 measurements") != std::string::npos);
    REQUIRE(fs::exists(work_root() / "c1" / "metadata.json"));
    REQUIRE(fs::exists(work_root() / "c1" / "m_00000.csv"));
    REQUIRE(fs::exists(work_root() / "c1" / "run_manifest.json"));

    RunResult second = run_cli("synth --out " + (work_root() / "c2").string() +
                               " --houses 2 --instances 1 --periods 4 --fs 1200 --fg 60 --seed 9");
    REQUIRE(second.code == 0);
    const auto m1 = nlohmann::json::parse(slurp(work_root() / "c1" / "run_manifest.json"));
    const auto m2 = nlohmann::json::parse(slurp(work_root() / "c2" / "run_manifest.json"));
    REQUIRE(m1["output_digests"]["corpus"] == m2["output_digests"]["corpus"]);
    REQUIRE(m1["command"] == "synth");

    RunResult third = run_cli("synth --out " + (work_root() / "c3").string() +
                              " --houses 2 --instances 1 --periods 4 --fs 1200 --fg 60 --seed 10");
    REQUIRE(third.code == 0);
    const auto m3 = nlohmann::json::parse(slurp(work_root() / "c3" / "run_manifest.json"));
    REQUIRE(m1["output_digests"]["corpus"] != m3["output_digests"]["corpus"]);
}

TEST_CASE("synth rejects unknown families and impossible rates") {
    RunResult bad = run_cli("synth --out " + (work_root() / "bad").string() +
                            " --categories lamp:quantum");
    REQUIRE(bad.code == 2);
    REQUIRE(bad.err.find("error:") != std::string::npos);

    RunResult frac = run_cli("synth --out " + (work_root() / "bad2").string() +
                             " --fs 1000 --fg 60");
    REQUIRE(frac.code == 2);
}

TEST_CASE("crossval writes reports and a manifest") {
    const std::string out = (work_root() / "cv1").string();
    RunResult r = run_cli("crossval --data " + corpus_dir() + " --out " + out + kQuick);
    REQUIRE(r.code == 0);
    REQUIRE(r.out.find("alpha = ") != std::string::npos);

    const auto report = nlohmann::json::parse(slurp(fs::path(out) / "report.json"));
    REQUIRE(report["alpha"].is_number());
    REQUIRE(report["alpha"].get<double>() >= 0.0);
    REQUIRE(report["alpha"].get<double>() <= 1.0);
    REQUIRE(report["per_house"].size() == 3);
    REQUIRE(report["config"]["epsilon"] == 5);
    REQUIRE(report["voting"] == "weighted");

    const std::string text = slurp(fs::path(out) / "report.txt");
    REQUIRE(text.find("alpha = ") != std::string::npos);

    const auto manifest = nlohmann::json::parse(slurp(fs::path(out) / "run_manifest.json"));
    REQUIRE(manifest["command"] == "crossval");
    REQUIRE(manifest["output_digests"].contains("report.json"));
    REQUIRE(manifest["input_digest"].get<std::string>().size() == 16);
}

TEST_CASE("crossval is reproducible byte for byte") {
    const std::string out1 = (work_root() / "cv_rep1").string();
    const std::string out2 = (work_root() / "cv_rep2").string();
    REQUIRE(run_cli("crossval --data " + corpus_dir() + " --out " + out1 + kQuick).code == 0);
    REQUIRE(run_cli("crossval --data " + corpus_dir() + " --out " + out2 + kQuick + " --jobs 3").code ==
            0);
    REQUIRE(slurp(fs::path(out1) / "report.json") == slurp(fs::path(out2) / "report.json"));
    REQUIRE(slurp(fs::path(out1) / "report.txt") == slurp(fs::path(out2) / "report.txt"));
}

TEST_CASE("voting and prior-knowledge switches are honored") {
    const std::string out = (work_root() / "cv_maj").string();
    RunResult r = run_cli("crossval --data " + corpus_dir() + " --out " + out + kQuick +
                          " --voting majority --scoring window");
    REQUIRE(r.code == 0);
    const auto report = nlohmann::json::parse(slurp(fs::path(out) / "report.json"));
    REQUIRE(report["voting"] == "majority");
    REQUIRE(report["scoring"] == "window");

    const std::string out2 = (work_root() / "cv_prior").string();
    RunResult p = run_cli("crossval --data " + corpus_dir() + " --out " + out2 + kQuick +
                          " --prior-knowledge");
    REQUIRE(p.code == 0);
    const auto prior = nlohmann::json::parse(slurp(fs::path(out2) / "report.json"));
    REQUIRE(prior["config"]["prior_knowledge"] == true);
}

TEST_CASE("freq study reports rejected rates and honors --strict") {
    const std::string out = (work_root() / "study_freq").string();
    RunResult r = run_cli("study --study freq --values 600,500 --data " + corpus_dir() + " --out " +
                          out + kQuick);
    REQUIRE(r.code == 0);
    REQUIRE(r.err.find("rejected:") != std::string::npos);
    const std::string csv = slurp(fs::path(out) / "study_freq.csv");
    REQUIRE(csv.rfind("x,alpha,kappa\n", 0) == 0);
    REQUIRE(csv.find("\n600,") != std::string::npos);
    REQUIRE(csv.find("\n500,") == std::string::npos);

    RunResult strict = run_cli("study --study freq --values 600,500 --data " + corpus_dir() +
                               " --out " + (work_root() / "study_freq_strict").string() + kQuick +
                               " --strict");
    REQUIRE(strict.code == 3);
}

TEST_CASE("size study at full fraction reproduces the crossval score") {
    const std::string cv_out = (work_root() / "cv_for_size").string();
    REQUIRE(run_cli("crossval --data " + corpus_dir() + " --out " + cv_out + kQuick).code == 0);
    const double cv_alpha =
        nlohmann::json::parse(slurp(fs::path(cv_out) / "report.json"))["alpha"].get<double>();

    const std::string out = (work_root() / "study_size").string();
    RunResult r = run_cli("study --study size --values 1.0 --data " + corpus_dir() + " --out " + out +
                          kQuick);
    REQUIRE(r.code == 0);
    const std::string csv = slurp(fs::path(out) / "study_size.csv");
    const auto line_start = csv.find("\n1,");
    REQUIRE(line_start != std::string::npos);
    const auto comma = csv.find(',', line_start + 1);
    const double study_alpha = std::stod(csv.substr(comma + 1));
    REQUIRE(study_alpha == Catch::Approx(cv_alpha).margin(1e-9));
}

TEST_CASE("train then predict round trips through the model directory") {
    const std::string model = (work_root() / "model").string();
    RunResult t = run_cli("train --data " + corpus_dir() + " --out " + model + kQuick);
    REQUIRE(t.code == 0);
    REQUIRE(t.out.find("trained 1 pair networks over 2 labels") != std::string::npos);
    REQUIRE(fs::exists(fs::path(model) / "manifest.json"));
    REQUIRE(fs::exists(fs::path(model) / "pair_0000.net"));
    REQUIRE(fs::exists(fs::path(model) / "run_manifest.json"));

    const std::string preds = (work_root() / "predictions.csv").string();
    RunResult p = run_cli("predict --model " + model + " --data " + corpus_dir() + " --out " + preds +
                          kQuick);
    REQUIRE(p.code == 0);
    REQUIRE(p.out.find("alpha=") != std::string::npos);
    const std::string csv = slurp(preds);
    REQUIRE(csv.rfind("house,appliance_id,true_label,predicted_label\n", 0) == 0);
    std::size_t rows = 0;
    for (const char c : csv) {
        if (c == '\n') ++rows;
    }
    REQUIRE(rows == 1 + 6);  // header + one row per measurement
    REQUIRE(fs::exists(preds + ".manifest.json"));
}

TEST_CASE("missing inputs fail with a clear error") {
    RunResult r = run_cli("crossval --data " + (work_root() / "no_such_dir").string() + " --out " +
                          (work_root() / "cv_missing").string() + kQuick);
    REQUIRE(r.code == 2);
    REQUIRE(r.err.find("error:") != std::string::npos);

    RunResult p = run_cli("predict --model " + (work_root() / "no_model").string() + " --data " +
                          corpus_dir() + " --out " + (work_root() / "nope.csv").string());
    REQUIRE(p.code == 2);
}
