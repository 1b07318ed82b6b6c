#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseprior/rng.hpp"

// Count-matrix ingestion and the preprocessing pipeline: quality filtering to
// a fixpoint, size-factor normalization that excludes very highly expressed
// genes from the factor computation, log1p transform, dispersion-based
// highly-variable-gene selection, and the train/test split. Statistics are
// fit on training cells only and applied to held-out cells.

namespace sparseprior::prep {

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Triplet {
    long cell = 0;
    long gene = 0;
    long long count = 0;
};

struct CountMatrix {
    long n_cells = 0;
    long n_genes = 0;
    std::vector<std::string> cell_ids;
    std::vector<std::string> gene_ids;
    std::vector<Triplet> entries;  // sorted by (cell, gene), no duplicates

    void validate() const;  // invariants: bounds, sort order, nonnegative counts
    std::vector<double> to_dense() const;
    long long cell_total(long cell) const;
};

// Dense cells x genes matrix with identifiers, used downstream of
// normalization.
struct Dense {
    long rows = 0;
    long cols = 0;
    std::vector<std::string> cell_ids;
    std::vector<std::string> gene_ids;
    std::vector<double> values;  // row-major

    double at(long r, long c) const { return values[r * cols + c]; }
};

// ---- readers / writers ------------------------------------------------------
// Dense CSV: header row of gene ids, then one line per cell starting with the
// cell id followed by integer counts. Triplet text: "rows cols nnz" header
// followed by 1-indexed "row col value" lines, with companion id files (one
// id per line). All parse errors carry the offending line number.

CountMatrix read_csv_counts(const std::string& path);
CountMatrix read_triplets(const std::string& matrix_path, const std::string& cell_ids_path,
                          const std::string& gene_ids_path);
void write_csv_counts(const std::string& path, const CountMatrix& m);
void write_csv_dense(const std::string& path, const Dense& m);
Dense read_csv_dense(const std::string& path);

// ---- pipeline steps ---------------------------------------------------------

struct FilterResult {
    CountMatrix matrix;
    long cells_removed = 0;
    long genes_removed = 0;
    std::vector<std::string> removed_cell_ids;
    std::vector<std::string> removed_gene_ids;
};

// Drops cells without any expressed gene and genes expressed in fewer than
// min_cells cells, alternating until a fixpoint. Errors when nothing is left.
FilterResult quality_filter(const CountMatrix& m, long min_cells = 10);

struct NormalizeFit {
    std::vector<std::string> excluded_genes;  // left out of factor sums
    double median_retained = 0.0;             // median of retained sums over the fit cells
    double highly_expressed_frac = 0.05;
};

// A gene is excluded from factor computation when it exceeds
// highly_expressed_frac of any fit cell's total counts.
NormalizeFit fit_normalize(const CountMatrix& fit_cells, double highly_expressed_frac = 0.05);

struct Normalized {
    Dense matrix;                     // counts divided by per-cell factors
    std::vector<double> size_factors;
};

// Every entry (excluded genes included) is divided by the cell's factor;
// errors when a cell has no counts on retained genes.
Normalized apply_normalize(const CountMatrix& m, const NormalizeFit& fit);

Dense log_transform(const Dense& m);  // elementwise log1p

struct HvgResult {
    std::vector<long> selected;        // gene indices, ascending
    std::vector<double> dispersions;   // per input gene: variance/mean
    std::vector<double> z_scores;      // per input gene: within-bin z-score
    bool truncated = false;            // fewer genes than requested
};

// Dispersion-based selection on normalized pre-log expression: per-gene
// variance/mean, 20 equal-width mean bins, z-score within bin, global top k.
// Ties break on gene id so the choice is independent of input gene order.
HvgResult select_hvg(const Dense& normalized_pre_log, long k, int bins = 20);

struct Split {
    CountMatrix train;
    CountMatrix test;
};

// Disjoint, exhaustive cell partition; deterministic per seed.
Split split_cells(const CountMatrix& m, double train_fraction, std::uint64_t seed);

struct LibraryStats {
    double mu_g = 0.0;     // mean of log cell totals
    double sigma_g = 0.0;  // population standard deviation, must be > 0
};

LibraryStats library_stats(const CountMatrix& train);

CountMatrix subset_genes(const CountMatrix& m, const std::vector<long>& gene_indices);
Dense subset_genes(const Dense& m, const std::vector<long>& gene_indices);

// ---- whole pipeline ----------------------------------------------------------

struct PreprocessOptions {
    long min_cells = 10;
    double highly_expressed_frac = 0.05;
    long hvg_k = 720;
    int hvg_bins = 20;
    bool hvg_on_log = false;  // compute dispersions on log1p values instead
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
};

struct PreprocessResult {
    CountMatrix train_raw;  // counts over selected genes
    CountMatrix test_raw;
    Dense train_input;      // normalized log1p over selected genes
    Dense test_input;
    nlohmann::ordered_json report;  // removals, factors, HVG table, mu_g/sigma_g
    LibraryStats lib;
};

PreprocessResult preprocess(const CountMatrix& m, const PreprocessOptions& opt);

}  // namespace sparseprior::prep
