#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sparseprior/rng.hpp"
#include "support/testutil.hpp"

// End-to-end checks of the command-line surface. SPARSEPRIOR_CLI is the path
// to the built binary.

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args, const std::string& workdir,
                  const std::string& env = "") {
    const std::string out_file = workdir + "/_stdout", err_file = workdir + "/_stderr";
    const std::string cmd = "cd '" + workdir + "' && " + env + " '" + SPARSEPRIOR_CLI + "' " +
                            args + " > '" + out_file + "' 2> '" + err_file + "'";
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = testutil::read_file(out_file);
    r.err = testutil::read_file(err_file);
    return r;
}

void write_small_spec(const std::string& path, std::uint64_t seed) {
    testutil::write_file(path, R"({"clusters": 3, "cells_per_cluster": 30, "genes": 80,
        "dispersion": 0.5, "dropout_logit": -2.0, "lib_log_mean": 6.0, "lib_log_sd": 0.2,
        "seed": )" + std::to_string(seed) + "}");
}

const char* small_config = R"({"seed": 4, "n_z": 2, "batch_size": 16, "steps": 200,
    "lambda": 1.0, "beta": 10.0, "disc_training_ratio": 5,
    "lr_ae": 1e-3, "lr_critic": 1e-3, "lr_gen": 1e-3, "lr_enc": 1e-4,
    "enc_hidden": [16, 8], "gen_hidden": [8], "critic_hidden": [8], "eval_every": 50})";

}  // namespace

TEST_CASE("synth and preprocess are byte-reproducible") {
    testutil::TempDir tmp("cli_repro");
    write_small_spec(tmp.path("spec.json"), 5);
    REQUIRE(run_cli("synth --spec spec.json --out d1", tmp.path()).code == 0);
    REQUIRE(run_cli("synth --spec spec.json --out d2", tmp.path()).code == 0);
    CHECK(testutil::read_file(tmp.path("d1/counts.csv")) ==
          testutil::read_file(tmp.path("d2/counts.csv")));
    CHECK(testutil::read_file(tmp.path("d1/labels.csv")) ==
          testutil::read_file(tmp.path("d2/labels.csv")));

    REQUIRE(run_cli("preprocess --input d1/counts.csv --out p1 --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d1/counts.csv --out p2 --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    for (const char* f :
         {"train_raw.csv", "test_raw.csv", "train_input.csv", "test_input.csv", "report.json"})
        CHECK(testutil::read_file(tmp.path("p1/") + f) == testutil::read_file(tmp.path("p2/") + f));
}

TEST_CASE("malformed triplet input names the line and exits 2") {
    testutil::TempDir tmp("cli_triplet");
    testutil::write_file(tmp.path("m.txt"), "3 2 2\n1 1 4\n3 x 7\n");
    testutil::write_file(tmp.path("m.txt.cells"), "a\nb\nc\n");
    testutil::write_file(tmp.path("m.txt.genes"), "g\nh\n");
    const auto r = run_cli("preprocess --input m.txt --format triplet --out p", tmp.path());
    CHECK(r.code == 2);
    CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("invalid config is rejected before training") {
    testutil::TempDir tmp("cli_cfg");
    write_small_spec(tmp.path("spec.json"), 6);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    testutil::write_file(tmp.path("bad.json"), R"({"lambda": -0.5})");
    const auto r = run_cli("train --config bad.json --data p --out run", tmp.path());
    CHECK(r.code == 2);
    CHECK(r.err.find("lambda") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp.path("run/checkpoint.bin")));
}

TEST_CASE("train smoke run writes every artifact; embed and evaluate consume them") {
    testutil::TempDir tmp("cli_chain");
    write_small_spec(tmp.path("spec.json"), 7);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    testutil::write_file(tmp.path("cfg.json"), small_config);
    REQUIRE(run_cli("train --config cfg.json --data p --out run", tmp.path()).code == 0);
    for (const char* f : {"run/checkpoint.bin", "run/checkpoint.genes.json", "run/loss_log.jsonl",
                          "run/manifest.json"})
        CHECK(fs::exists(tmp.path(f)));

    // loss log: one line per step, parseable, eval cadence respected
    std::ifstream log(tmp.path("run/loss_log.jsonl"));
    std::string line;
    long lines = 0, evals = 0;
    while (std::getline(log, line)) {
        const auto j = nlohmann::json::parse(line);
        CHECK(j.at("step").get<long>() == ++lines);
        if (j.contains("eval_l_ae")) ++evals;
    }
    CHECK(lines == 200);
    CHECK(evals == 4);

    REQUIRE(run_cli("embed --checkpoint run/checkpoint.bin --matrix p/test_input.csv "
                    "--out emb.csv", tmp.path()).code == 0);
    REQUIRE(run_cli("embed --checkpoint run/checkpoint.bin --matrix p/test_input.csv "
                    "--out emb2.csv", tmp.path()).code == 0);
    CHECK(testutil::read_file(tmp.path("emb.csv")) == testutil::read_file(tmp.path("emb2.csv")));

    const auto ev = run_cli(
        "evaluate --embeddings emb.csv --labels d/labels.csv --k 3 --seed 5 --out metrics.json",
        tmp.path());
    REQUIRE(ev.code == 0);
    const auto metrics = nlohmann::json::parse(testutil::read_file(tmp.path("metrics.json")));
    for (const char* key : {"nmi", "ami", "homogeneity", "completeness"}) {
        REQUIRE(metrics.contains(key));
        CHECK(metrics.at(key).is_number());
    }
    CHECK(metrics.at("k").get<long>() == 3);
    CHECK(metrics.at("seed").get<long>() == 5);
    CHECK(metrics.at("restarts").get<long>() == 10);

    // plot: one circle per embedded cell, reproducible bytes
    REQUIRE(run_cli("plot --embeddings emb.csv --labels d/labels.csv --out plot.svg",
                    tmp.path()).code == 0);
    const auto svg = testutil::read_file(tmp.path("plot.svg"));
    long circles = 0;
    for (std::size_t pos = 0; (pos = svg.find("<circle", pos)) != std::string::npos; ++pos)
        ++circles;
    CHECK(circles == metrics.at("cells").get<long>());
    REQUIRE(run_cli("plot --embeddings emb.csv --labels d/labels.csv --out plot2.svg",
                    tmp.path()).code == 0);
    CHECK(svg == testutil::read_file(tmp.path("plot2.svg")));
}

TEST_CASE("periodic checkpoints come with their gene sidecars and are usable") {
    testutil::TempDir tmp("cli_ckpt");
    write_small_spec(tmp.path("spec.json"), 16);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    auto cfg = nlohmann::json::parse(small_config);
    cfg["steps"] = 20;
    cfg["checkpoint_every"] = 10;
    testutil::write_file(tmp.path("cfg.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg.json --data p --out run", tmp.path()).code == 0);
    CHECK(fs::exists(tmp.path("run/checkpoint_10.bin")));
    CHECK(fs::exists(tmp.path("run/checkpoint_10.genes.json")));
    REQUIRE(run_cli("embed --checkpoint run/checkpoint_10.bin --matrix p/test_input.csv "
                    "--out mid.csv", tmp.path()).code == 0);
}

TEST_CASE("cli resume reproduces the uninterrupted loss log byte for byte") {
    testutil::TempDir tmp("cli_resume");
    write_small_spec(tmp.path("spec.json"), 8);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);

    auto cfg = nlohmann::json::parse(small_config);
    cfg["steps"] = 12;
    testutil::write_file(tmp.path("cfg12.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg12.json --data p --out full", tmp.path()).code == 0);

    cfg["steps"] = 7;
    testutil::write_file(tmp.path("cfg7.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg7.json --data p --out part", tmp.path()).code == 0);
    // the checkpoint carries its config; bump the horizon and resume in place
    cfg["steps"] = 12;
    testutil::write_file(tmp.path("cfg12b.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg12b.json --data p --out part "
                    "--resume part/checkpoint.bin", tmp.path()).code == 0);
    CHECK(testutil::read_file(tmp.path("part/loss_log.jsonl")) ==
          testutil::read_file(tmp.path("full/loss_log.jsonl")));
}

TEST_CASE("thread cap changes nothing but the wall clock") {
    testutil::TempDir tmp("cli_threads");
    write_small_spec(tmp.path("spec.json"), 14);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    auto cfg = nlohmann::json::parse(small_config);
    cfg["steps"] = 30;
    testutil::write_file(tmp.path("cfg.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg.json --data p --out r1", tmp.path(),
                    "SPARSEPRIOR_THREADS=1").code == 0);
    REQUIRE(run_cli("train --config cfg.json --data p --out r2", tmp.path(),
                    "SPARSEPRIOR_THREADS=2").code == 0);
    CHECK(testutil::read_file(tmp.path("r1/loss_log.jsonl")) ==
          testutil::read_file(tmp.path("r2/loss_log.jsonl")));
    CHECK(testutil::read_file(tmp.path("r1/checkpoint.bin")) ==
          testutil::read_file(tmp.path("r2/checkpoint.bin")));
}

TEST_CASE("numeric divergence exits with code 3") {
    testutil::TempDir tmp("cli_diverge");
    write_small_spec(tmp.path("spec.json"), 15);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    auto cfg = nlohmann::json::parse(small_config);
    cfg["steps"] = 30;
    cfg["lr_ae"] = 1e15;  // guarantees an overflow within a few steps
    testutil::write_file(tmp.path("cfg.json"), cfg.dump());
    const auto r = run_cli("train --config cfg.json --data p --out run", tmp.path());
    CHECK(r.code == 3);
    CHECK(r.err.find("diverged") != std::string::npos);
}

TEST_CASE("embed rejects a gene-list mismatch and names the genes") {
    testutil::TempDir tmp("cli_mismatch");
    write_small_spec(tmp.path("spec.json"), 9);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    auto cfg = nlohmann::json::parse(small_config);
    cfg["steps"] = 5;
    testutil::write_file(tmp.path("cfg.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg.json --data p --out run", tmp.path()).code == 0);

    // rename one gene column in the matrix header
    auto matrix = testutil::read_file(tmp.path("p/test_input.csv"));
    const auto pos = matrix.find(",g");
    REQUIRE(pos != std::string::npos);
    matrix.replace(pos, 2, ",ZZ");
    testutil::write_file(tmp.path("renamed.csv"), matrix);
    const auto r = run_cli(
        "embed --checkpoint run/checkpoint.bin --matrix renamed.csv --out e.csv", tmp.path());
    CHECK(r.code == 2);
    CHECK(r.err.find("ZZ") != std::string::npos);
    CHECK(r.err.find("missing") != std::string::npos);
}

TEST_CASE("embed output is independent of input row order") {
    testutil::TempDir tmp("cli_shuffle");
    write_small_spec(tmp.path("spec.json"), 10);
    REQUIRE(run_cli("synth --spec spec.json --out d", tmp.path()).code == 0);
    REQUIRE(run_cli("preprocess --input d/counts.csv --out p --seed 3 --hvg-k 40",
                    tmp.path()).code == 0);
    auto cfg = nlohmann::json::parse(small_config);
    cfg["steps"] = 5;
    testutil::write_file(tmp.path("cfg.json"), cfg.dump());
    REQUIRE(run_cli("train --config cfg.json --data p --out run", tmp.path()).code == 0);
    REQUIRE(run_cli("embed --checkpoint run/checkpoint.bin --matrix p/test_input.csv "
                    "--out a.csv", tmp.path()).code == 0);

    // reverse the data rows of the matrix
    std::ifstream in(tmp.path("p/test_input.csv"));
    std::string header, line;
    std::getline(in, header);
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    std::reverse(rows.begin(), rows.end());
    std::string flipped = header + "\n";
    for (const auto& r : rows) flipped += r + "\n";
    testutil::write_file(tmp.path("flipped.csv"), flipped);
    REQUIRE(run_cli("embed --checkpoint run/checkpoint.bin --matrix flipped.csv --out b.csv",
                    tmp.path()).code == 0);

    auto parse = [&](const std::string& path) {
        std::map<std::string, std::string> by_cell;
        std::ifstream f(path);
        std::string h, l;
        std::getline(f, h);
        while (std::getline(f, l)) by_cell[l.substr(0, l.find(','))] = l;
        return by_cell;
    };
    CHECK(parse(tmp.path("a.csv")) == parse(tmp.path("b.csv")));
}

TEST_CASE("evaluate: perfect one-hot embeddings score 1, random embeddings near 0") {
    testutil::TempDir tmp("cli_eval");
    sparseprior::Rng rng(12);

    std::string emb = "cell,z0,z1\n", labels = "cell,label\n";
    // 1000 cells, 2 balanced classes, embeddings carry no signal
    for (int i = 0; i < 1000; ++i) {
        const std::string cell = "c" + std::to_string(i);
        emb += cell + "," + std::to_string(rng.uniform(-1, 1)) + "," +
               std::to_string(rng.uniform(-1, 1)) + "\n";
        labels += cell + ",t" + std::to_string(i % 2) + "\n";
    }
    testutil::write_file(tmp.path("emb.csv"), emb);
    testutil::write_file(tmp.path("labels.csv"), labels);
    REQUIRE(run_cli("evaluate --embeddings emb.csv --labels labels.csv --k 2 --seed 3 "
                    "--out null.json", tmp.path()).code == 0);
    CHECK(nlohmann::json::parse(testutil::read_file(tmp.path("null.json"))).at("nmi").get<double>() <
          0.05);

    // one-hot embeddings equal to the labels separate perfectly
    std::string emb2 = "cell,z0,z1\n";
    for (int i = 0; i < 40; ++i)
        emb2 += "c" + std::to_string(i) + (i % 2 ? ",1,0\n" : ",0,1\n");
    testutil::write_file(tmp.path("emb2.csv"), emb2);
    std::string labels2 = "cell,label\n";
    for (int i = 0; i < 40; ++i) labels2 += "c" + std::to_string(i) + ",t" + std::to_string(i % 2) + "\n";
    testutil::write_file(tmp.path("labels2.csv"), labels2);
    REQUIRE(run_cli("evaluate --embeddings emb2.csv --labels labels2.csv --k 2 --seed 3 "
                    "--out perfect.json", tmp.path()).code == 0);
    CHECK(nlohmann::json::parse(testutil::read_file(tmp.path("perfect.json")))
              .at("nmi").get<double>() == doctest::Approx(1.0).epsilon(1e-12));

    // missing label for an embedded cell
    testutil::write_file(tmp.path("short.csv"), "cell,label\nc0,t0\n");
    const auto r = run_cli("evaluate --embeddings emb2.csv --labels short.csv --k 2 --out x.json",
                           tmp.path());
    CHECK(r.code == 2);
    CHECK(r.err.find("c1") != std::string::npos);

    // a cell listed twice in the label file is rejected
    testutil::write_file(tmp.path("dup.csv"), "cell,label\nc0,t0\nc0,t1\n");
    const auto dup = run_cli("evaluate --embeddings emb2.csv --labels dup.csv --k 2 --out y.json",
                             tmp.path());
    CHECK(dup.code == 2);
    CHECK(dup.err.find("duplicate") != std::string::npos);
}

TEST_CASE("plot requires 2-D embeddings unless --pca is given") {
    testutil::TempDir tmp("cli_pca");
    sparseprior::Rng rng(5);
    std::string emb = "cell";
    for (int j = 0; j < 10; ++j) emb += ",z" + std::to_string(j);
    emb += "\n";
    std::string labels = "cell,label\n";
    for (int i = 0; i < 30; ++i) {
        emb += "c" + std::to_string(i);
        for (int j = 0; j < 10; ++j) emb += "," + std::to_string(rng.uniform(-2, 2));
        emb += "\n";
        labels += "c" + std::to_string(i) + ",t" + std::to_string(i % 3) + "\n";
    }
    testutil::write_file(tmp.path("emb10.csv"), emb);
    testutil::write_file(tmp.path("labels.csv"), labels);

    const auto no_pca = run_cli("plot --embeddings emb10.csv --labels labels.csv --out p.svg",
                                tmp.path());
    CHECK(no_pca.code == 2);
    CHECK(no_pca.err.find("--pca") != std::string::npos);
    REQUIRE(run_cli("plot --embeddings emb10.csv --labels labels.csv --out p.svg --pca",
                    tmp.path()).code == 0);
    const auto svg = testutil::read_file(tmp.path("p.svg"));
    long circles = 0;
    for (std::size_t pos = 0; (pos = svg.find("<circle", pos)) != std::string::npos; ++pos)
        ++circles;
    CHECK(circles == 30);
}
