// Command-line pipeline: synth -> preprocess -> train -> embed -> evaluate,
// plus an SVG scatter of labeled embeddings. Every command derives all its
// randomness from --seed (or the config seed), records input digests in a
// manifest, and writes byte-reproducible outputs.
//
// Exit codes: 0 success, 2 validation error, 3 numeric divergence.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparseprior/cluster.hpp"
#include "sparseprior/manifest.hpp"
#include "sparseprior/preprocess.hpp"
#include "sparseprior/svgplot.hpp"
#include "sparseprior/synth.hpp"
#include "sparseprior/textio.hpp"
#include "sparseprior/trainer.hpp"

namespace fs = std::filesystem;
using namespace sparseprior;

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw prep::ValidationError("cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw prep::ValidationError(path + ": " + e.what());
    }
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

struct LabelFile {
    std::vector<std::string> cells;
    std::vector<std::string> labels;
    std::map<std::string, std::string> by_cell;
};

LabelFile read_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw prep::ValidationError("cannot read " + path);
    LabelFile lf;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line == "cell,label") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw prep::ValidationError(path + ": line " + std::to_string(line_no) +
                                        ": expected 'cell,label'");
        const std::string cell = line.substr(0, comma), label = line.substr(comma + 1);
        if (!lf.by_cell.emplace(cell, label).second)
            throw prep::ValidationError(path + ": line " + std::to_string(line_no) +
                                        ": duplicate cell id " + cell);
        lf.cells.push_back(cell);
        lf.labels.push_back(label);
    }
    if (lf.cells.empty()) throw prep::ValidationError(path + ": no labels");
    return lf;
}

// Labels for the given cells, as dense integers; unknown cells are an error.
std::pair<std::vector<int>, std::vector<std::string>> labels_for(
    const LabelFile& lf, const std::vector<std::string>& cells) {
    std::set<std::string> names;
    std::vector<std::string> missing;
    for (const auto& c : cells) {
        auto it = lf.by_cell.find(c);
        if (it == lf.by_cell.end())
            missing.push_back(c);
        else
            names.insert(it->second);
    }
    if (!missing.empty()) {
        std::string msg = "labels missing for cell(s):";
        for (std::size_t i = 0; i < missing.size() && i < 8; ++i) msg += " " + missing[i];
        if (missing.size() > 8) msg += " (+" + std::to_string(missing.size() - 8) + " more)";
        throw prep::ValidationError(msg);
    }
    std::vector<std::string> name_list(names.begin(), names.end());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < name_list.size(); ++i) index[name_list[i]] = static_cast<int>(i);
    std::vector<int> out;
    out.reserve(cells.size());
    for (const auto& c : cells) out.push_back(index.at(lf.by_cell.at(c)));
    return {out, name_list};
}

void write_embeddings_csv(const std::string& path, const std::vector<std::string>& cells,
                          const std::vector<double>& z, long n_z) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "cell";
    for (long j = 0; j < n_z; ++j) out << ",z" << j;
    out << '\n';
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out << cells[i];
        for (long j = 0; j < n_z; ++j) out << ',' << fmt_double(z[i * n_z + j]);
        out << '\n';
    }
}

train::DataSet dataset_from_dir(const fs::path& dir, const std::string& side, double mu_g,
                                double sigma_g) {
    const auto raw = prep::read_csv_dense((dir / (side + "_raw.csv")).string());
    const auto input = prep::read_csv_dense((dir / (side + "_input.csv")).string());
    if (raw.gene_ids != input.gene_ids || raw.cell_ids != input.cell_ids)
        throw prep::ValidationError(side + ": raw and input matrices disagree on ids");
    train::DataSet ds;
    ds.cells = raw.rows;
    ds.genes = raw.cols;
    ds.cell_ids = raw.cell_ids;
    ds.gene_ids = raw.gene_ids;
    ds.raw = raw.values;
    ds.input = input.values;
    ds.mu_g = mu_g;
    ds.sigma_g = sigma_g;
    return ds;
}

// ---- subcommands -----------------------------------------------------------

int cmd_synth(const std::string& spec_path, const std::string& out_dir, long seed_override) {
    auto spec_json = load_json(spec_path);
    if (seed_override >= 0) spec_json["seed"] = seed_override;
    const synth::SynthSpec spec = synth::spec_from_json(spec_json);
    const auto result = synth::generate(spec);

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    manifest::RunManifest man;
    man.command = "synth";
    man.seed = spec.seed;
    man.config = synth::spec_to_json(spec);
    man.add_input(spec_path);

    prep::write_csv_counts((out / "counts.csv").string(), result.counts);
    {
        std::string text = "cell,label\n";
        for (long c = 0; c < result.counts.n_cells; ++c)
            text += result.counts.cell_ids[c] + ",cluster" + std::to_string(result.labels[c]) +
                    "\n";
        write_text((out / "labels.csv").string(), text);
    }
    man.outputs = {(out / "counts.csv").string(), (out / "labels.csv").string()};
    man.write((out / "manifest.json").string());
    std::cout << "wrote " << result.counts.n_cells << " cells x " << result.counts.n_genes
              << " genes to " << out_dir << "\n";
    return 0;
}

int cmd_preprocess(const std::string& input, const std::string& format,
                   const std::string& cells_path, const std::string& genes_path,
                   const std::string& out_dir, const prep::PreprocessOptions& opt) {
    manifest::RunManifest man;
    man.command = "preprocess";
    man.seed = opt.seed;
    man.add_input(input);

    prep::CountMatrix m;
    if (format == "csv") {
        m = prep::read_csv_counts(input);
    } else if (format == "triplet") {
        const std::string cp = cells_path.empty() ? input + ".cells" : cells_path;
        const std::string gp = genes_path.empty() ? input + ".genes" : genes_path;
        man.add_input(cp);
        man.add_input(gp);
        m = prep::read_triplets(input, cp, gp);
    } else {
        throw prep::ValidationError("unknown format '" + format + "' (use csv or triplet)");
    }

    const auto res = prep::preprocess(m, opt);
    if (res.report.at("hvg_truncated").get<bool>())
        std::cerr << "warning: fewer genes than the requested " << opt.hvg_k
                  << " survived filtering; keeping all " << res.train_raw.n_genes << "\n";

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    prep::write_csv_counts((out / "train_raw.csv").string(), res.train_raw);
    prep::write_csv_counts((out / "test_raw.csv").string(), res.test_raw);
    prep::write_csv_dense((out / "train_input.csv").string(), res.train_input);
    prep::write_csv_dense((out / "test_input.csv").string(), res.test_input);
    manifest::write_atomic((out / "report.json").string(), res.report.dump(2) + "\n");

    man.config = {{"min_cells", opt.min_cells},
                  {"highly_expressed_frac", opt.highly_expressed_frac},
                  {"hvg_k", opt.hvg_k},
                  {"hvg_bins", opt.hvg_bins},
                  {"hvg_on_log", opt.hvg_on_log},
                  {"train_fraction", opt.train_fraction},
                  {"seed", opt.seed}};
    for (const char* f : {"train_raw.csv", "test_raw.csv", "train_input.csv", "test_input.csv",
                          "report.json"})
        man.outputs.push_back((out / f).string());
    man.write((out / "manifest.json").string());
    std::cout << "kept " << res.train_raw.n_cells << "+" << res.test_raw.n_cells << " cells, "
              << res.train_raw.n_genes << " genes\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& resume, long seed_override) {
    auto cfg_json = load_json(config_path);
    if (seed_override >= 0) cfg_json["seed"] = seed_override;
    train::RunConfig cfg = train::config_from_json(cfg_json);

    const fs::path data(data_dir);
    const auto report = load_json((data / "report.json").string());
    const double mu_g = report.at("mu_g").get<double>();
    const double sigma_g = report.at("sigma_g").get<double>();

    const auto train_set = dataset_from_dir(data, "train", mu_g, sigma_g);
    const auto test_set = dataset_from_dir(data, "test", mu_g, sigma_g);

    manifest::RunManifest man;
    man.command = "train";
    man.seed = cfg.seed;
    man.config = train::config_to_json(cfg);
    man.add_input(config_path);
    for (const char* f :
         {"train_raw.csv", "train_input.csv", "test_raw.csv", "test_input.csv", "report.json"})
        man.add_input((data / f).string());

    fs::create_directories(out_dir);
    const fs::path out(out_dir);
    const std::string log_path = (out / "loss_log.jsonl").string();
    const std::string ckpt_path = (out / "checkpoint.bin").string();
    const std::string sidecar_path = (out / "checkpoint.genes.json").string();

    auto trainer = resume.empty() ? train::Trainer::fresh(cfg, train_set.genes)
                                  : train::Trainer::load_checkpoint(resume);
    if (!resume.empty()) trainer.adopt_run_length(cfg);
    if (trainer.model().dims.n_genes != train_set.genes)
        throw prep::ValidationError("checkpoint gene count does not match the data");

    const model::Sidecar sidecar{train_set.gene_ids, mu_g, sigma_g, trainer.config().n_z};

    std::ofstream log(log_path, resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot write " + log_path);

    try {
        trainer.train(train_set, &test_set, [&](const train::LossReport& r) {
            log << train::report_to_json(r).dump() << '\n';
            if (cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0 &&
                r.step < cfg.steps) {
                const std::string stem = "checkpoint_" + std::to_string(r.step);
                trainer.save_checkpoint((out / (stem + ".bin")).string());
                model::write_sidecar((out / (stem + ".genes.json")).string(), sidecar);
            }
        });
    } catch (const train::DivergenceError& e) {
        log.flush();
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    }
    log.flush();

    trainer.save_checkpoint(ckpt_path);
    model::write_sidecar(sidecar_path, sidecar);
    man.outputs = {log_path, ckpt_path, sidecar_path};
    man.write((out / "manifest.json").string());
    std::cout << "trained " << trainer.step() << " steps; checkpoint at " << ckpt_path << "\n";
    return 0;
}

int cmd_embed(const std::string& ckpt_path, const std::string& matrix_path,
              const std::string& out_path) {
    const auto archive = nn::read_archive(ckpt_path);
    const auto mdl = model::model_from_archive(archive);
    const auto sidecar = model::read_sidecar(
        (fs::path(ckpt_path).parent_path() / (fs::path(ckpt_path).stem().string() + ".genes.json"))
            .string());

    const auto input = prep::read_csv_dense(matrix_path);
    if (input.gene_ids != sidecar.genes) {
        std::string msg = "gene list mismatch between checkpoint and matrix;";
        std::set<std::string> want(sidecar.genes.begin(), sidecar.genes.end());
        std::set<std::string> got(input.gene_ids.begin(), input.gene_ids.end());
        std::vector<std::string> extra, absent;
        for (const auto& g : got)
            if (!want.count(g)) extra.push_back(g);
        for (const auto& g : want)
            if (!got.count(g)) absent.push_back(g);
        auto join = [](const std::vector<std::string>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size() && i < 6; ++i) s += " " + v[i];
            if (v.size() > 6) s += " (+" + std::to_string(v.size() - 6) + " more)";
            return s.empty() ? std::string(" none") : s;
        };
        msg += " unexpected:" + join(extra) + "; missing:" + join(absent);
        if (extra.empty() && absent.empty()) msg += " (same set, different order)";
        throw prep::ValidationError(msg);
    }

    const auto z = train::embed(mdl, input.values, input.rows, input.cols);
    write_embeddings_csv(out_path, input.cell_ids, z, mdl.dims.n_z);

    manifest::RunManifest man;
    man.command = "embed";
    man.seed = mdl.seed;
    man.add_input(ckpt_path);
    man.add_input(matrix_path);
    man.outputs = {out_path};
    man.write(out_path + ".manifest.json");
    std::cout << "embedded " << input.rows << " cells at n_z=" << mdl.dims.n_z << "\n";
    return 0;
}

int cmd_evaluate(const std::string& emb_path, const std::string& labels_path, long k,
                 std::uint64_t seed, int restarts, const std::string& fit_path,
                 const std::string& out_path) {
    const auto emb = prep::read_csv_dense(emb_path);
    const auto lf = read_labels(labels_path);
    const auto [y_true, names] = labels_for(lf, emb.cell_ids);

    std::vector<int> y_pred;
    if (fit_path.empty()) {
        y_pred = cluster::kmeans(emb.values, emb.rows, emb.cols, k, seed, restarts).labels;
    } else {
        const auto fit_emb = prep::read_csv_dense(fit_path);
        if (fit_emb.cols != emb.cols)
            throw prep::ValidationError("fit embeddings dimensionality differs");
        const auto km = cluster::kmeans(fit_emb.values, fit_emb.rows, fit_emb.cols, k, seed,
                                        restarts);
        y_pred = cluster::assign_to_centroids(emb.values, emb.rows, emb.cols, km.centroids, k);
    }

    const auto [h, c] = cluster::homogeneity_completeness(y_true, y_pred);
    nlohmann::ordered_json out;
    out["nmi"] = cluster::nmi(y_true, y_pred);
    out["ami"] = cluster::ami(y_true, y_pred);
    out["homogeneity"] = h;
    out["completeness"] = c;
    out["k"] = k;
    out["seed"] = seed;
    out["restarts"] = restarts;
    out["cells"] = emb.rows;
    manifest::write_atomic(out_path, out.dump(2) + "\n");

    manifest::RunManifest man;
    man.command = "evaluate";
    man.seed = seed;
    man.config = {{"k", k}, {"restarts", restarts}};
    man.add_input(emb_path);
    man.add_input(labels_path);
    if (!fit_path.empty()) man.add_input(fit_path);
    man.outputs = {out_path};
    man.write(out_path + ".manifest.json");
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_plot(const std::string& emb_path, const std::string& labels_path,
             const std::string& out_path, bool use_pca) {
    const auto emb = prep::read_csv_dense(emb_path);
    const auto lf = read_labels(labels_path);
    const auto [labels, names] = labels_for(lf, emb.cell_ids);

    std::vector<double> xy;
    if (emb.cols == 2) {
        xy = emb.values;
    } else if (use_pca) {
        xy = cluster::pca_project(emb.values, emb.rows, emb.cols, 2).projected;
    } else {
        throw prep::ValidationError("embeddings are " + std::to_string(emb.cols) +
                                    "-dimensional; pass --pca to project to 2-D");
    }
    plot::write_scatter_svg(out_path, xy, emb.rows, labels, names);

    manifest::RunManifest man;
    man.command = "plot";
    man.config = {{"pca", use_pca}};
    man.add_input(emb_path);
    man.add_input(labels_path);
    man.outputs = {out_path};
    man.write(out_path + ".manifest.json");
    std::cout << "plotted " << emb.rows << " cells to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"learned-prior zero-inflated autoencoder pipeline for count matrices"};
    app.require_subcommand(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "draw a labeled ZINB count matrix");
    std::string synth_spec, synth_out = ".";
    long synth_seed = -1;
    synth_cmd->add_option("--spec", synth_spec, "generator spec JSON")->required();
    synth_cmd->add_option("--out", synth_out, "output directory");
    synth_cmd->add_option("--seed", synth_seed, "override the spec seed");

    // preprocess
    auto* prep_cmd = app.add_subcommand("preprocess", "filter, normalize and split a count matrix");
    std::string prep_input, prep_format = "csv", prep_cells, prep_genes, prep_out = ".";
    prep::PreprocessOptions popt;
    prep_cmd->add_option("--input", prep_input, "count matrix file")->required();
    prep_cmd->add_option("--format", prep_format, "csv or triplet")
        ->check(CLI::IsMember({"csv", "triplet"}));
    prep_cmd->add_option("--cells", prep_cells, "cell id file (triplet format)");
    prep_cmd->add_option("--genes", prep_genes, "gene id file (triplet format)");
    prep_cmd->add_option("--out", prep_out, "output directory");
    prep_cmd->add_option("--seed", popt.seed, "split seed");
    prep_cmd->add_option("--hvg-k", popt.hvg_k, "highly variable genes to keep");
    prep_cmd->add_option("--hvg-bins", popt.hvg_bins, "mean-expression bins for dispersion z-scores");
    prep_cmd->add_flag("--hvg-on-log", popt.hvg_on_log, "rank dispersion on log1p values");
    prep_cmd->add_option("--min-cells", popt.min_cells, "minimum cells expressing a kept gene");
    prep_cmd->add_option("--highly-expressed-frac", popt.highly_expressed_frac,
                         "per-cell fraction above which a gene is left out of size factors");
    prep_cmd->add_option("--train-fraction", popt.train_fraction, "training split fraction");

    // train
    auto* train_cmd = app.add_subcommand("train", "fit the model on preprocessed data");
    std::string train_config, train_data, train_out = ".", train_resume;
    long train_seed = -1;
    train_cmd->add_option("--config", train_config, "run configuration JSON")->required();
    train_cmd->add_option("--data", train_data, "preprocessed data directory")->required();
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--resume", train_resume, "checkpoint to continue from");
    train_cmd->add_option("--seed", train_seed, "override the config seed");

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "write latent coordinates for a matrix");
    std::string embed_ckpt, embed_matrix, embed_out = "embeddings.csv";
    embed_cmd->add_option("--checkpoint", embed_ckpt, "trained checkpoint")->required();
    embed_cmd->add_option("--matrix", embed_matrix, "preprocessed input matrix CSV")->required();
    embed_cmd->add_option("--out", embed_out, "embeddings CSV path");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "cluster embeddings and score against labels");
    std::string eval_emb, eval_labels, eval_fit, eval_out = "metrics.json";
    long eval_k = 0;
    std::uint64_t eval_seed = 1;
    int eval_restarts = 10;
    eval_cmd->add_option("--embeddings", eval_emb, "embeddings CSV")->required();
    eval_cmd->add_option("--labels", eval_labels, "cell,label CSV")->required();
    eval_cmd->add_option("--k", eval_k, "cluster count")->required();
    eval_cmd->add_option("--seed", eval_seed, "k-means seed");
    eval_cmd->add_option("--restarts", eval_restarts, "k-means restarts");
    eval_cmd->add_option("--fit-embeddings", eval_fit,
                         "fit centroids on this file, assign the --embeddings file");
    eval_cmd->add_option("--out", eval_out, "metrics JSON path");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "labeled scatter of 2-D embeddings");
    std::string plot_emb, plot_labels, plot_out = "plot.svg";
    bool plot_pca = false;
    plot_cmd->add_option("--embeddings", plot_emb, "embeddings CSV")->required();
    plot_cmd->add_option("--labels", plot_labels, "cell,label CSV")->required();
    plot_cmd->add_option("--out", plot_out, "SVG path");
    plot_cmd->add_flag("--pca", plot_pca, "project higher-dimensional embeddings first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out, synth_seed);
        if (prep_cmd->parsed())
            return cmd_preprocess(prep_input, prep_format, prep_cells, prep_genes, prep_out, popt);
        if (train_cmd->parsed())
            return cmd_train(train_config, train_data, train_out, train_resume, train_seed);
        if (embed_cmd->parsed()) return cmd_embed(embed_ckpt, embed_matrix, embed_out);
        if (eval_cmd->parsed())
            return cmd_evaluate(eval_emb, eval_labels, eval_k, eval_seed, eval_restarts, eval_fit,
                                eval_out);
        if (plot_cmd->parsed()) return cmd_plot(plot_emb, plot_labels, plot_out, plot_pca);
    } catch (const prep::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const train::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const train::DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
