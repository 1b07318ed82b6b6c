#include "sparseprior/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "sparseprior/textio.hpp"

namespace sparseprior::prep {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

long long parse_count(const std::string& s, const std::string& path, long line_no) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &pos);
    } catch (...) {
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": not an integer count: '" + s + "'");
    }
    if (pos != s.size())
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": not an integer count: '" + s + "'");
    if (v < 0)
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": negative count: '" + s + "'");
    return v;
}

std::vector<std::string> read_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void CountMatrix::validate() const {
    if (static_cast<long>(cell_ids.size()) != n_cells ||
        static_cast<long>(gene_ids.size()) != n_genes)
        throw ValidationError("count matrix: id lists do not match dimensions");
    const Triplet* prev = nullptr;
    for (const auto& t : entries) {
        if (t.cell < 0 || t.cell >= n_cells || t.gene < 0 || t.gene >= n_genes)
            throw ValidationError("count matrix: entry out of bounds");
        if (t.count < 0) throw ValidationError("count matrix: negative count");
        if (prev) {
            if (t.cell < prev->cell || (t.cell == prev->cell && t.gene < prev->gene))
                throw ValidationError("count matrix: entries out of order");
            if (t.cell == prev->cell && t.gene == prev->gene)
                throw ValidationError("count matrix: duplicate (cell, gene) pair");
        }
        prev = &t;
    }
}

std::vector<double> CountMatrix::to_dense() const {
    std::vector<double> d(static_cast<std::size_t>(n_cells) * n_genes, 0.0);
    for (const auto& t : entries) d[t.cell * n_genes + t.gene] = static_cast<double>(t.count);
    return d;
}

long long CountMatrix::cell_total(long cell) const {
    long long acc = 0;
    for (const auto& t : entries)
        if (t.cell == cell) acc += t.count;
    return acc;
}

// ---- io -----------------------------------------------------------------------

CountMatrix read_csv_counts(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_line(line, ',');

    CountMatrix m;
    long line_no = 1;
    bool header_resolved = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (!header_resolved) {
            const long data_cols = static_cast<long>(fields.size()) - 1;
            if (data_cols < 1)
                throw ValidationError(path + ": line " + std::to_string(line_no) +
                                      ": expected a cell id and at least one count");
            if (static_cast<long>(header.size()) == data_cols + 1)
                header.erase(header.begin());  // leading id-column label
            if (static_cast<long>(header.size()) != data_cols)
                throw ValidationError(path + ": line 1: header has " +
                                      std::to_string(header.size()) + " gene ids but rows carry " +
                                      std::to_string(data_cols) + " counts");
            m.gene_ids = header;
            m.n_genes = data_cols;
            header_resolved = true;
        }
        if (static_cast<long>(fields.size()) != m.n_genes + 1)
            throw ValidationError(path + ": line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(m.n_genes + 1) + " fields, got " +
                                  std::to_string(fields.size()));
        const long cell = m.n_cells++;
        m.cell_ids.push_back(fields[0]);
        for (long g = 0; g < m.n_genes; ++g) {
            const long long v = parse_count(fields[g + 1], path, line_no);
            if (v != 0) m.entries.push_back({cell, g, v});
        }
    }
    if (!header_resolved) throw ValidationError(path + ": no data rows");
    m.validate();
    return m;
}

CountMatrix read_triplets(const std::string& matrix_path, const std::string& cell_ids_path,
                          const std::string& gene_ids_path) {
    std::ifstream in(matrix_path);
    if (!in) throw ValidationError("cannot read " + matrix_path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(matrix_path + ": empty file");
    std::stringstream hs(line);
    long rows = 0, cols = 0;
    long long nnz = 0;
    if (!(hs >> rows >> cols >> nnz) || rows < 1 || cols < 1 || nnz < 0)
        throw ValidationError(matrix_path + ": line 1: expected header 'rows cols nnz'");
    std::string extra;
    if (hs >> extra)
        throw ValidationError(matrix_path + ": line 1: expected header 'rows cols nnz'");

    CountMatrix m;
    m.n_cells = rows;
    m.n_genes = cols;
    m.cell_ids = read_id_file(cell_ids_path);
    m.gene_ids = read_id_file(gene_ids_path);
    if (static_cast<long>(m.cell_ids.size()) != rows)
        throw ValidationError(cell_ids_path + ": has " + std::to_string(m.cell_ids.size()) +
                              " ids, matrix declares " + std::to_string(rows) + " rows");
    if (static_cast<long>(m.gene_ids.size()) != cols)
        throw ValidationError(gene_ids_path + ": has " + std::to_string(m.gene_ids.size()) +
                              " ids, matrix declares " + std::to_string(cols) + " columns");

    std::unordered_set<long long> seen;
    long line_no = 1;
    long long read_entries = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ls(line);
        long r = 0, c = 0;
        long long v = 0;
        if (!(ls >> r >> c >> v) || (ls >> extra))
            throw ValidationError(matrix_path + ": line " + std::to_string(line_no) +
                                  ": expected 'row col value'");
        if (r < 1 || r > rows || c < 1 || c > cols)
            throw ValidationError(matrix_path + ": line " + std::to_string(line_no) +
                                  ": index out of range");
        if (v < 0)
            throw ValidationError(matrix_path + ": line " + std::to_string(line_no) +
                                  ": negative count");
        const long long key = static_cast<long long>(r - 1) * cols + (c - 1);
        if (!seen.insert(key).second)
            throw ValidationError(matrix_path + ": line " + std::to_string(line_no) +
                                  ": duplicate (cell, gene) pair");
        ++read_entries;
        if (v != 0) m.entries.push_back({r - 1, c - 1, v});
    }
    if (read_entries != nnz)
        throw ValidationError(matrix_path + ": header declares " + std::to_string(nnz) +
                              " entries, found " + std::to_string(read_entries));
    std::sort(m.entries.begin(), m.entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.cell != b.cell ? a.cell < b.cell : a.gene < b.gene;
    });
    m.validate();
    return m;
}

void write_csv_counts(const std::string& path, const CountMatrix& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path);
    out << "cell";
    for (const auto& g : m.gene_ids) out << ',' << g;
    out << '\n';
    const auto dense = m.to_dense();
    for (long c = 0; c < m.n_cells; ++c) {
        out << m.cell_ids[c];
        for (long g = 0; g < m.n_genes; ++g)
            out << ',' << static_cast<long long>(dense[c * m.n_genes + g]);
        out << '\n';
    }
}

void write_csv_dense(const std::string& path, const Dense& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path);
    out << "cell";
    for (const auto& g : m.gene_ids) out << ',' << g;
    out << '\n';
    for (long r = 0; r < m.rows; ++r) {
        out << m.cell_ids[r];
        for (long c = 0; c < m.cols; ++c) out << ',' << fmt_double(m.at(r, c));
        out << '\n';
    }
}

Dense read_csv_dense(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_line(line, ',');

    Dense d;
    long line_no = 1;
    bool header_resolved = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line, ',');
        if (!header_resolved) {
            const long data_cols = static_cast<long>(fields.size()) - 1;
            if (data_cols < 1)
                throw ValidationError(path + ": line " + std::to_string(line_no) +
                                      ": expected a cell id and at least one value");
            if (static_cast<long>(header.size()) == data_cols + 1) header.erase(header.begin());
            if (static_cast<long>(header.size()) != data_cols)
                throw ValidationError(path + ": line 1: header width mismatch");
            d.gene_ids = header;
            d.cols = data_cols;
            header_resolved = true;
        }
        if (static_cast<long>(fields.size()) != d.cols + 1)
            throw ValidationError(path + ": line " + std::to_string(line_no) +
                                  ": expected " + std::to_string(d.cols + 1) + " fields");
        d.cell_ids.push_back(fields[0]);
        for (long c = 0; c < d.cols; ++c) {
            try {
                std::size_t pos = 0;
                d.values.push_back(std::stod(fields[c + 1], &pos));
                if (pos != fields[c + 1].size()) throw std::invalid_argument("trailing");
            } catch (...) {
                throw ValidationError(path + ": line " + std::to_string(line_no) +
                                      ": not a number: '" + fields[c + 1] + "'");
            }
        }
        ++d.rows;
    }
    if (!header_resolved) throw ValidationError(path + ": no data rows");
    return d;
}

// ---- filtering ------------------------------------------------------------------

namespace {

CountMatrix take_subset(const CountMatrix& m, const std::vector<char>& keep_cell,
                        const std::vector<char>& keep_gene) {
    CountMatrix out;
    std::vector<long> cell_map(m.n_cells, -1), gene_map(m.n_genes, -1);
    for (long c = 0; c < m.n_cells; ++c)
        if (keep_cell[c]) {
            cell_map[c] = out.n_cells++;
            out.cell_ids.push_back(m.cell_ids[c]);
        }
    for (long g = 0; g < m.n_genes; ++g)
        if (keep_gene[g]) {
            gene_map[g] = out.n_genes++;
            out.gene_ids.push_back(m.gene_ids[g]);
        }
    for (const auto& t : m.entries)
        if (cell_map[t.cell] >= 0 && gene_map[t.gene] >= 0)
            out.entries.push_back({cell_map[t.cell], gene_map[t.gene], t.count});
    return out;
}

}  // namespace

FilterResult quality_filter(const CountMatrix& m, long min_cells) {
    m.validate();
    FilterResult res;
    res.matrix = m;
    for (;;) {
        const CountMatrix& cur = res.matrix;
        std::vector<long> genes_per_cell(cur.n_cells, 0), cells_per_gene(cur.n_genes, 0);
        for (const auto& t : cur.entries)
            if (t.count > 0) {
                ++genes_per_cell[t.cell];
                ++cells_per_gene[t.gene];
            }
        std::vector<char> keep_cell(cur.n_cells), keep_gene(cur.n_genes);
        long removed = 0;
        for (long c = 0; c < cur.n_cells; ++c) {
            keep_cell[c] = genes_per_cell[c] >= 1;
            if (!keep_cell[c]) {
                ++removed, ++res.cells_removed;
                res.removed_cell_ids.push_back(cur.cell_ids[c]);
            }
        }
        for (long g = 0; g < cur.n_genes; ++g) {
            keep_gene[g] = cells_per_gene[g] >= min_cells;
            if (!keep_gene[g]) {
                ++removed, ++res.genes_removed;
                res.removed_gene_ids.push_back(cur.gene_ids[g]);
            }
        }
        if (removed == 0) break;
        res.matrix = take_subset(cur, keep_cell, keep_gene);
        if (res.matrix.n_cells == 0 || res.matrix.n_genes == 0)
            throw ValidationError("quality filter removed everything; matrix is unusable");
    }
    return res;
}

// ---- normalization ----------------------------------------------------------------

NormalizeFit fit_normalize(const CountMatrix& fit_cells, double highly_expressed_frac) {
    if (!(highly_expressed_frac > 0.0) || !(highly_expressed_frac <= 1.0))
        throw ValidationError("highly_expressed_frac must lie in (0, 1]");
    NormalizeFit fit;
    fit.highly_expressed_frac = highly_expressed_frac;

    std::vector<long long> totals(fit_cells.n_cells, 0);
    for (const auto& t : fit_cells.entries) totals[t.cell] += t.count;

    std::vector<char> excluded(fit_cells.n_genes, 0);
    for (const auto& t : fit_cells.entries)
        if (static_cast<double>(t.count) >
            highly_expressed_frac * static_cast<double>(totals[t.cell]))
            excluded[t.gene] = 1;
    for (long g = 0; g < fit_cells.n_genes; ++g)
        if (excluded[g]) fit.excluded_genes.push_back(fit_cells.gene_ids[g]);

    std::vector<double> retained(fit_cells.n_cells, 0.0);
    for (const auto& t : fit_cells.entries)
        if (!excluded[t.gene]) retained[t.cell] += static_cast<double>(t.count);
    for (long c = 0; c < fit_cells.n_cells; ++c)
        if (retained[c] <= 0.0)
            throw ValidationError("cell " + fit_cells.cell_ids[c] +
                                  " has no counts on retained genes");
    fit.median_retained = median_of(retained);
    return fit;
}

Normalized apply_normalize(const CountMatrix& m, const NormalizeFit& fit) {
    std::vector<char> excluded(m.n_genes, 0);
    for (long g = 0; g < m.n_genes; ++g)
        for (const auto& name : fit.excluded_genes)
            if (m.gene_ids[g] == name) {
                excluded[g] = 1;
                break;
            }
    std::vector<double> retained(m.n_cells, 0.0);
    for (const auto& t : m.entries)
        if (!excluded[t.gene]) retained[t.cell] += static_cast<double>(t.count);

    Normalized out;
    out.matrix.rows = m.n_cells;
    out.matrix.cols = m.n_genes;
    out.matrix.cell_ids = m.cell_ids;
    out.matrix.gene_ids = m.gene_ids;
    out.matrix.values.assign(static_cast<std::size_t>(m.n_cells) * m.n_genes, 0.0);
    out.size_factors.resize(m.n_cells);
    for (long c = 0; c < m.n_cells; ++c) {
        if (retained[c] <= 0.0)
            throw ValidationError("cell " + m.cell_ids[c] + " has no counts on retained genes");
        out.size_factors[c] = retained[c] / fit.median_retained;
    }
    for (const auto& t : m.entries)
        out.matrix.values[t.cell * m.n_genes + t.gene] =
            static_cast<double>(t.count) / out.size_factors[t.cell];
    return out;
}

Dense log_transform(const Dense& m) {
    Dense out = m;
    for (auto& v : out.values) {
        if (v < 0.0) throw ValidationError("log transform: negative input");
        v = std::log1p(v);
    }
    return out;
}

// ---- HVG ---------------------------------------------------------------------------

HvgResult select_hvg(const Dense& normalized, long k, int bins) {
    if (k <= 0) throw ValidationError("hvg: k must be positive");
    if (bins < 1) throw ValidationError("hvg: bins must be positive");
    const long n = normalized.rows, g = normalized.cols;
    if (n < 2) throw ValidationError("hvg: need at least two cells");

    HvgResult res;
    res.dispersions.resize(g);
    res.z_scores.assign(g, 0.0);
    std::vector<double> means(g, 0.0);
    for (long j = 0; j < g; ++j) {
        double mean = 0.0;
        for (long i = 0; i < n; ++i) mean += normalized.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (long i = 0; i < n; ++i) {
            const double d = normalized.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n - 1);
        means[j] = mean;
        res.dispersions[j] = mean > 0.0 ? var / mean : 0.0;
    }

    // equal-width bins over the mean range
    const double lo = *std::min_element(means.begin(), means.end());
    const double hi = *std::max_element(means.begin(), means.end());
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    std::vector<int> bin_of(g, 0);
    std::vector<std::vector<long>> members(static_cast<std::size_t>(bins));
    for (long j = 0; j < g; ++j) {
        int b = hi > lo ? static_cast<int>((means[j] - lo) / width) : 0;
        if (b >= bins) b = bins - 1;
        bin_of[j] = b;
        members[b].push_back(j);
    }
    for (const auto& bucket : members) {
        if (bucket.size() < 2) continue;
        double m = 0.0;
        for (long j : bucket) m += res.dispersions[j];
        m /= static_cast<double>(bucket.size());
        double v = 0.0;
        for (long j : bucket) v += (res.dispersions[j] - m) * (res.dispersions[j] - m);
        v /= static_cast<double>(bucket.size() - 1);
        const double sd = std::sqrt(v);
        if (sd > 0.0)
            for (long j : bucket) res.z_scores[j] = (res.dispersions[j] - m) / sd;
    }

    std::vector<long> order(g);
    for (long j = 0; j < g; ++j) order[j] = j;
    // zero-dispersion genes rank after every varying gene
    std::sort(order.begin(), order.end(), [&](long a, long b) {
        const bool va = res.dispersions[a] > 0.0, vb = res.dispersions[b] > 0.0;
        if (va != vb) return va;
        if (res.z_scores[a] != res.z_scores[b]) return res.z_scores[a] > res.z_scores[b];
        if (res.dispersions[a] != res.dispersions[b])
            return res.dispersions[a] > res.dispersions[b];
        return normalized.gene_ids[a] < normalized.gene_ids[b];
    });
    const long take = std::min<long>(k, g);
    res.truncated = take < k;
    res.selected.assign(order.begin(), order.begin() + take);
    std::sort(res.selected.begin(), res.selected.end());
    return res;
}

// ---- split / stats -----------------------------------------------------------------

Split split_cells(const CountMatrix& m, double train_fraction, std::uint64_t seed) {
    if (m.n_cells < 2) throw ValidationError("split: need at least two cells");
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
        throw ValidationError("split: fraction must lie in (0, 1)");
    std::vector<long> order(m.n_cells);
    for (long i = 0; i < m.n_cells; ++i) order[i] = i;
    Rng rng = Rng::stream(seed, "preprocess/split");
    for (long i = m.n_cells - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i + 1))]);

    long n_train = static_cast<long>(std::llround(train_fraction * m.n_cells));
    n_train = std::clamp<long>(n_train, 1, m.n_cells - 1);
    std::vector<char> in_train(m.n_cells, 0);
    for (long i = 0; i < n_train; ++i) in_train[order[i]] = 1;

    std::vector<char> all_genes(m.n_genes, 1);
    std::vector<char> train_mask(in_train.begin(), in_train.end());
    std::vector<char> test_mask(m.n_cells);
    for (long i = 0; i < m.n_cells; ++i) test_mask[i] = !in_train[i];
    return Split{take_subset(m, train_mask, all_genes), take_subset(m, test_mask, all_genes)};
}

LibraryStats library_stats(const CountMatrix& train) {
    if (train.n_cells < 2)
        throw ValidationError("library stats: need at least two cells for a spread estimate");
    std::vector<double> logs(train.n_cells);
    std::vector<long long> totals(train.n_cells, 0);
    for (const auto& t : train.entries) totals[t.cell] += t.count;
    for (long c = 0; c < train.n_cells; ++c) {
        if (totals[c] <= 0) throw ValidationError("library stats: cell with zero total counts");
        logs[c] = std::log(static_cast<double>(totals[c]));
    }
    LibraryStats ls;
    for (double v : logs) ls.mu_g += v;
    ls.mu_g /= static_cast<double>(train.n_cells);
    double var = 0.0;
    for (double v : logs) var += (v - ls.mu_g) * (v - ls.mu_g);
    var /= static_cast<double>(train.n_cells);
    ls.sigma_g = std::sqrt(var);
    if (!(ls.sigma_g > 0.0))
        throw ValidationError("library stats: zero variance in log library sizes");
    return ls;
}

CountMatrix subset_genes(const CountMatrix& m, const std::vector<long>& gene_indices) {
    std::vector<char> keep_gene(m.n_genes, 0);
    for (long g : gene_indices) keep_gene[g] = 1;
    std::vector<char> keep_cell(m.n_cells, 1);
    return take_subset(m, keep_cell, keep_gene);
}

Dense subset_genes(const Dense& m, const std::vector<long>& gene_indices) {
    Dense out;
    out.rows = m.rows;
    out.cols = static_cast<long>(gene_indices.size());
    out.cell_ids = m.cell_ids;
    for (long g : gene_indices) out.gene_ids.push_back(m.gene_ids[g]);
    out.values.reserve(static_cast<std::size_t>(out.rows) * out.cols);
    for (long r = 0; r < m.rows; ++r)
        for (long g : gene_indices) out.values.push_back(m.at(r, g));
    return out;
}

// ---- pipeline -----------------------------------------------------------------------

PreprocessResult preprocess(const CountMatrix& m, const PreprocessOptions& opt) {
    const FilterResult filtered = quality_filter(m, opt.min_cells);
    const Split split = split_cells(filtered.matrix, opt.train_fraction, opt.seed);

    const NormalizeFit fit = fit_normalize(split.train, opt.highly_expressed_frac);
    const Normalized norm_train = apply_normalize(split.train, fit);
    const Normalized norm_test = apply_normalize(split.test, fit);
    const Dense log_train = log_transform(norm_train.matrix);
    const Dense log_test = log_transform(norm_test.matrix);

    const Dense& hvg_basis = opt.hvg_on_log ? log_train : norm_train.matrix;
    const HvgResult hvg = select_hvg(hvg_basis, opt.hvg_k, opt.hvg_bins);

    PreprocessResult res;
    res.train_raw = subset_genes(split.train, hvg.selected);
    res.test_raw = subset_genes(split.test, hvg.selected);
    res.train_input = subset_genes(log_train, hvg.selected);
    res.test_input = subset_genes(log_test, hvg.selected);
    res.lib = library_stats(split.train);

    nlohmann::ordered_json rep;
    rep["cells_removed"] = filtered.cells_removed;
    rep["genes_removed"] = filtered.genes_removed;
    rep["removed_cells"] = filtered.removed_cell_ids;
    rep["removed_genes"] = filtered.removed_gene_ids;
    rep["cells_kept"] = filtered.matrix.n_cells;
    rep["genes_kept"] = filtered.matrix.n_genes;
    rep["train_cells"] = split.train.cell_ids;
    rep["test_cells"] = split.test.cell_ids;
    rep["excluded_from_size_factors"] = fit.excluded_genes;
    rep["train_size_factors"] = norm_train.size_factors;
    rep["test_size_factors"] = norm_test.size_factors;
    rep["hvg_truncated"] = hvg.truncated;
    auto genes = nlohmann::ordered_json::array();
    for (long g : hvg.selected)
        genes.push_back({{"gene", filtered.matrix.gene_ids[g]},
                         {"dispersion", hvg.dispersions[g]},
                         {"z", hvg.z_scores[g]}});
    rep["selected_genes"] = genes;
    rep["mu_g"] = res.lib.mu_g;
    rep["sigma_g"] = res.lib.sigma_g;
    rep["options"] = {{"min_cells", opt.min_cells},
                      {"highly_expressed_frac", opt.highly_expressed_frac},
                      {"hvg_k", opt.hvg_k},
                      {"hvg_bins", opt.hvg_bins},
                      {"hvg_on_log", opt.hvg_on_log},
                      {"train_fraction", opt.train_fraction},
                      {"seed", opt.seed}};
    res.report = std::move(rep);
    return res;
}

}  // namespace sparseprior::prep
