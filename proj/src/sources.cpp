#include "semrd/sources.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semrd/error.hpp"
#include "semrd/numerics.hpp"

#include <json.hpp>

namespace semrd {

namespace {

Eigen::MatrixXd cholesky_or_throw(const Eigen::MatrixXd& m, const char* name) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite(std::string(name) + " is not positive definite");
    return llt.matrixL();
}

}  // namespace

GaussianSourceSpec benchmark_gaussian() {
    GaussianSourceSpec spec;
    spec.k_x.resize(3, 3);
    spec.k_x << 11.0, 0.0, 0.5,
                0.0, 3.0, -2.0,
                0.5, -2.0, 2.35;
    spec.h.resize(2, 3);
    spec.h << 0.0701, 0.305, 0.457,
              -0.0305, -0.220, 0.671;
    spec.k_w.resize(2, 2);
    spec.k_w << 0.71, -0.305,
                -0.305, 0.220;
    return spec;
}

SampleSet sample_gaussian(const GaussianSourceSpec& spec, Eigen::Index n1, Eigen::Index n2) {
    if (n1 < 1 || n2 < 1) throw DomainError("n1 and n2 must be at least 1");
    if (spec.h.cols() != spec.x_dim() || spec.h.rows() != spec.s_dim())
        throw DimensionMismatch("linear map does not match the covariances");
    const Eigen::MatrixXd l_x = cholesky_or_throw(spec.k_x, "k_x");
    const Eigen::MatrixXd l_w = cholesky_or_throw(spec.k_w, "k_w");

    SampleSet out;
    out.seed = spec.seed;
    out.n2 = n2;
    out.observations.resize(n1, spec.x_dim());
    out.semantic_samples.resize(n1 * n2, spec.s_dim());
    Rng rng(spec.seed);
    Eigen::VectorXd xi(spec.x_dim());
    Eigen::VectorXd wi(spec.s_dim());
    for (Eigen::Index i = 0; i < n1; ++i) {
        for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = rng.normal();
        out.observations.row(i) = (l_x * xi).transpose();
        const Eigen::VectorXd hx = spec.h * out.observations.row(i).transpose();
        for (Eigen::Index k = 0; k < n2; ++k) {
            for (Eigen::Index j = 0; j < wi.size(); ++j) wi[j] = rng.normal();
            out.semantic_samples.row(i * n2 + k) = (hx + l_w * wi).transpose();
        }
    }
    return out;
}

DiscretizationGrid default_grid(const GaussianSourceSpec& spec, int x_levels, int s_levels) {
    if (x_levels < 2 || s_levels < 2) throw DomainError("grids need at least 2 levels per axis");
    DiscretizationGrid g;
    for (Eigen::Index i = 0; i < spec.x_dim(); ++i) {
        const double sd = std::sqrt(spec.k_x(i, i));
        g.x_levels.push_back(x_levels);
        g.x_bounds.emplace_back(-4.0 * sd, 4.0 * sd);
    }
    const Eigen::MatrixXd k_s = spec.h * spec.k_x * spec.h.transpose() + spec.k_w;
    for (Eigen::Index i = 0; i < spec.s_dim(); ++i) {
        const double sd = std::sqrt(k_s(i, i));
        g.s_levels.push_back(s_levels);
        g.s_bounds.emplace_back(-4.0 * sd, 4.0 * sd);
    }
    return g;
}

namespace {

void check_grid_axis(const std::vector<int>& levels,
                     const std::vector<std::pair<double, double>>& bounds, Eigen::Index dim,
                     const char* name) {
    if (static_cast<Eigen::Index>(levels.size()) != dim ||
        static_cast<Eigen::Index>(bounds.size()) != dim)
        throw DimensionMismatch(std::string(name) + " grid does not match the source dimension");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] < 2) throw DomainError("grids need at least 2 levels per axis");
        if (!(bounds[i].first < bounds[i].second) || !std::isfinite(bounds[i].first) ||
            !std::isfinite(bounds[i].second))
            throw DomainError("grid bounds must be finite and ordered");
    }
}

Eigen::Index cell_of(const Eigen::RowVectorXd& v, const std::vector<int>& levels,
                     const std::vector<std::pair<double, double>>& bounds) {
    Eigen::Index idx = 0;
    for (std::size_t d = 0; d < levels.size(); ++d) {
        const auto [lo, hi] = bounds[d];
        const double w = (hi - lo) / levels[d];
        int c = static_cast<int>(std::floor((v[static_cast<Eigen::Index>(d)] - lo) / w));
        c = std::min(std::max(c, 0), levels[d] - 1);  // edge cells absorb the tails
        idx = idx * levels[d] + c;
    }
    return idx;
}

Eigen::MatrixXd cell_centers(const std::vector<int>& levels,
                             const std::vector<std::pair<double, double>>& bounds) {
    Eigen::Index total = 1;
    for (int l : levels) total *= l;
    Eigen::MatrixXd reps(total, static_cast<Eigen::Index>(levels.size()));
    for (Eigen::Index idx = 0; idx < total; ++idx) {
        Eigen::Index rem = idx;
        for (std::size_t d = levels.size(); d-- > 0;) {
            const int c = static_cast<int>(rem % levels[d]);
            rem /= levels[d];
            const auto [lo, hi] = bounds[d];
            const double w = (hi - lo) / levels[d];
            reps(idx, static_cast<Eigen::Index>(d)) = lo + (c + 0.5) * w;
        }
    }
    return reps;
}

}  // namespace

DiscretizedSource discretize_gaussian(const GaussianSourceSpec& spec,
                                      const DiscretizationGrid& grid, Eigen::Index mc_samples) {
    check_grid_axis(grid.x_levels, grid.x_bounds, spec.x_dim(), "observation");
    check_grid_axis(grid.s_levels, grid.s_bounds, spec.s_dim(), "semantic");
    if (mc_samples < 1) throw DomainError("mc_samples must be positive");

    Eigen::Index x_cells = 1;
    for (int l : grid.x_levels) x_cells *= l;
    Eigen::Index s_cells = 1;
    for (int l : grid.s_levels) s_cells *= l;

    const Eigen::MatrixXd l_x = cholesky_or_throw(spec.k_x, "k_x");
    const Eigen::MatrixXd l_w = cholesky_or_throw(spec.k_w, "k_w");

    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(x_cells, s_cells);
    Rng rng(spec.seed);
    Eigen::VectorXd xi(spec.x_dim());
    Eigen::VectorXd wi(spec.s_dim());
    Eigen::RowVectorXd x(spec.x_dim());
    Eigen::RowVectorXd s(spec.s_dim());
    for (Eigen::Index i = 0; i < mc_samples; ++i) {
        for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = rng.normal();
        x = (l_x * xi).transpose();
        for (Eigen::Index j = 0; j < wi.size(); ++j) wi[j] = rng.normal();
        s = (spec.h * x.transpose() + l_w * wi).transpose();
        counts(cell_of(x, grid.x_levels, grid.x_bounds),
               cell_of(s, grid.s_levels, grid.s_bounds)) += 1.0;
    }
    if ((counts.array() > 0.0).count() <= 1)
        throw DomainError("degenerate grid: all mass in one cell");

    DiscretizedSource d;
    d.source = build_source(counts);
    d.x_reps = cell_centers(grid.x_levels, grid.x_bounds);
    d.s_reps = cell_centers(grid.s_levels, grid.s_bounds);
    return d;
}

DistortionSpec discretized_distortions(const DiscretizedSource& d) {
    return make_distortion_spec(d.source, squared_error_distortion(d.x_reps, d.x_reps),
                                squared_error_distortion(d.s_reps, d.s_reps));
}

SampleSet sample_discretized(const DiscretizedSource& d, Eigen::Index n1, Eigen::Index n2,
                             std::uint64_t seed) {
    if (n1 < 1 || n2 < 1) throw DomainError("n1 and n2 must be at least 1");
    SampleSet out;
    out.seed = seed;
    out.n2 = n2;
    out.observations.resize(n1, d.x_reps.cols());
    out.semantic_samples.resize(n1 * n2, d.s_reps.cols());
    Rng rng(seed);
    const Eigen::Index xs = d.source.x_size();
    const Eigen::Index ss = d.source.s_size();
    for (Eigen::Index i = 0; i < n1; ++i) {
        double u = rng.uniform();
        Eigen::Index xc = xs - 1;
        for (Eigen::Index c = 0; c < xs; ++c) {
            u -= d.source.px[c];
            if (u < 0.0) {
                xc = c;
                break;
            }
        }
        out.observations.row(i) = d.x_reps.row(xc);
        for (Eigen::Index k = 0; k < n2; ++k) {
            double v = rng.uniform();
            Eigen::Index sc = ss - 1;
            for (Eigen::Index c = 0; c < ss; ++c) {
                v -= d.source.ps_given_x(xc, c);
                if (v < 0.0) {
                    sc = c;
                    break;
                }
            }
            out.semantic_samples.row(i * n2 + k) = d.s_reps.row(sc);
        }
    }
    return out;
}

LabeledDataset synth_labeled(int k_classes, const Eigen::MatrixXd& means,
                             const Eigen::MatrixXd& cov, Eigen::Index n, std::uint64_t seed) {
    if (k_classes < 2) throw DomainError("need at least two classes");
    if (means.rows() != k_classes) throw DimensionMismatch("one mean row per class required");
    if (cov.rows() != means.cols() || cov.cols() != means.cols())
        throw DimensionMismatch("covariance does not match the mean dimension");
    for (int a = 0; a < k_classes; ++a)
        for (int b = a + 1; b < k_classes; ++b)
            if ((means.row(a) - means.row(b)).norm() < 1e-12)
                throw DomainError("class means must be distinct");
    const Eigen::MatrixXd l = cholesky_or_throw(cov, "cov");

    LabeledDataset data;
    data.class_count = k_classes;
    data.observations.resize(n, means.cols());
    data.labels.resize(static_cast<std::size_t>(n));
    Rng rng(seed);
    Eigen::VectorXd xi(means.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % k_classes);  // balanced by construction
        for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = rng.normal();
        data.observations.row(i) = means.row(c) + (l * xi).transpose();
        data.labels[static_cast<std::size_t>(i)] = c;
    }
    return data;
}

// --- file formats -----------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct Header {
    Eigen::Index x_dims = 0;
    Eigen::Index s_dims = 0;
    bool labeled = false;
};

Header parse_header(const std::vector<std::string>& cols, long line_no) {
    Header h;
    std::size_t i = 0;
    for (; i < cols.size(); ++i) {
        if (cols[i] != "x" + std::to_string(i)) break;
    }
    h.x_dims = static_cast<Eigen::Index>(i);
    if (h.x_dims == 0) throw ParseError("header must start with x0", line_no);
    if (i == cols.size()) throw ParseError("header lacks semantic columns", line_no);
    if (cols[i] == "label") {
        if (i + 1 != cols.size()) throw ParseError("label must be the last column", line_no);
        h.labeled = true;
        return h;
    }
    for (std::size_t j = 0; i < cols.size(); ++i, ++j) {
        if (cols[i] != "s" + std::to_string(j))
            throw ParseError("unexpected column name '" + cols[i] + "'", line_no);
    }
    h.s_dims = static_cast<Eigen::Index>(cols.size()) - h.x_dims;
    return h;
}

double parse_double(const std::string& s, long line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("malformed number '" + s + "'", line_no);
    }
}

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

LoadedSamples load_samples(const std::string& path, SampleFormat format) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open sample file: " + path);

    std::vector<Eigen::VectorXd> x_rows;
    std::vector<Eigen::VectorXd> s_rows;
    std::vector<int> labels;
    Header header;
    bool have_header = false;
    int max_label = -1;

    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (format == SampleFormat::csv) {
            const std::vector<std::string> cols = split_csv(line);
            if (!have_header) {
                header = parse_header(cols, line_no);
                have_header = true;
                continue;
            }
            const std::size_t expected =
                static_cast<std::size_t>(header.x_dims + (header.labeled ? 1 : header.s_dims));
            if (cols.size() != expected)
                throw ParseError("expected " + std::to_string(expected) + " fields, found " +
                                     std::to_string(cols.size()),
                                 line_no);
            Eigen::VectorXd x(header.x_dims);
            for (Eigen::Index k = 0; k < header.x_dims; ++k)
                x[k] = parse_double(cols[static_cast<std::size_t>(k)], line_no);
            x_rows.push_back(std::move(x));
            if (header.labeled) {
                const double raw =
                    parse_double(cols[static_cast<std::size_t>(header.x_dims)], line_no);
                const int label = static_cast<int>(raw);
                if (raw != label || label < 0) throw ParseError("label must be a nonnegative integer", line_no);
                labels.push_back(label);
                max_label = std::max(max_label, label);
            } else {
                Eigen::VectorXd s(header.s_dims);
                for (Eigen::Index k = 0; k < header.s_dims; ++k)
                    s[k] = parse_double(cols[static_cast<std::size_t>(header.x_dims + k)], line_no);
                s_rows.push_back(std::move(s));
            }
        } else {
            nlohmann::json row;
            try {
                row = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(std::string("bad json: ") + e.what(), line_no);
            }
            if (!row.contains("x") || !row["x"].is_array())
                throw ParseError("missing x array", line_no);
            Eigen::VectorXd x(row["x"].size());
            for (std::size_t k = 0; k < row["x"].size(); ++k) x[static_cast<Eigen::Index>(k)] = row["x"][k].get<double>();
            if (!x_rows.empty() && x.size() != x_rows.front().size())
                throw ParseError("inconsistent x width", line_no);
            x_rows.push_back(std::move(x));
            if (row.contains("label")) {
                const int label = row["label"].get<int>();
                if (label < 0) throw ParseError("label must be nonnegative", line_no);
                labels.push_back(label);
                max_label = std::max(max_label, label);
            } else if (row.contains("s") && row["s"].is_array()) {
                Eigen::VectorXd s(row["s"].size());
                for (std::size_t k = 0; k < row["s"].size(); ++k) s[static_cast<Eigen::Index>(k)] = row["s"][k].get<double>();
                if (!s_rows.empty() && s.size() != s_rows.front().size())
                    throw ParseError("inconsistent s width", line_no);
                s_rows.push_back(std::move(s));
            } else {
                throw ParseError("row needs either s or label", line_no);
            }
        }
    }
    if (x_rows.empty()) throw ParseError("no data rows", line_no);
    if (!labels.empty() && !s_rows.empty())
        throw ParseError("rows mix labels and semantic vectors", line_no);

    if (!labels.empty()) {
        LabeledDataset data;
        data.class_count = max_label + 1;
        data.labels = std::move(labels);
        data.observations.resize(static_cast<Eigen::Index>(x_rows.size()), x_rows.front().size());
        for (std::size_t i = 0; i < x_rows.size(); ++i)
            data.observations.row(static_cast<Eigen::Index>(i)) = x_rows[i].transpose();
        return data;
    }
    SampleSet set;
    set.n2 = 1;
    set.observations.resize(static_cast<Eigen::Index>(x_rows.size()), x_rows.front().size());
    set.semantic_samples.resize(static_cast<Eigen::Index>(s_rows.size()), s_rows.front().size());
    for (std::size_t i = 0; i < x_rows.size(); ++i) {
        set.observations.row(static_cast<Eigen::Index>(i)) = x_rows[i].transpose();
        set.semantic_samples.row(static_cast<Eigen::Index>(i)) = s_rows[i].transpose();
    }
    return set;
}

void save_samples(const std::string& path, const SampleSet& samples, SampleFormat format) {
    if (samples.n2 != 1)
        throw DomainError("sample files hold one semantic draw per observation");
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open sample file for writing: " + path);
    if (format == SampleFormat::csv) {
        for (Eigen::Index k = 0; k < samples.x_dim(); ++k) out << (k ? "," : "") << "x" << k;
        for (Eigen::Index k = 0; k < samples.s_dim(); ++k) out << ",s" << k;
        out << '\n';
        for (Eigen::Index i = 0; i < samples.n1(); ++i) {
            for (Eigen::Index k = 0; k < samples.x_dim(); ++k)
                out << (k ? "," : "") << fmt_value(samples.observations(i, k));
            for (Eigen::Index k = 0; k < samples.s_dim(); ++k)
                out << ',' << fmt_value(samples.semantic_samples(i, k));
            out << '\n';
        }
    } else {
        for (Eigen::Index i = 0; i < samples.n1(); ++i) {
            nlohmann::json row;
            row["x"] = std::vector<double>(samples.observations.row(i).begin(),
                                           samples.observations.row(i).end());
            row["s"] = std::vector<double>(samples.semantic_samples.row(i).begin(),
                                           samples.semantic_samples.row(i).end());
            out << row.dump() << '\n';
        }
    }
}

void save_samples(const std::string& path, const LabeledDataset& data, SampleFormat format) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot open sample file for writing: " + path);
    if (format == SampleFormat::csv) {
        for (Eigen::Index k = 0; k < data.observations.cols(); ++k)
            out << (k ? "," : "") << "x" << k;
        out << ",label\n";
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            for (Eigen::Index k = 0; k < data.observations.cols(); ++k)
                out << (k ? "," : "") << fmt_value(data.observations(i, k));
            out << ',' << data.labels[static_cast<std::size_t>(i)] << '\n';
        }
    } else {
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            nlohmann::json row;
            row["x"] = std::vector<double>(data.observations.row(i).begin(),
                                           data.observations.row(i).end());
            row["label"] = data.labels[static_cast<std::size_t>(i)];
            out << row.dump() << '\n';
        }
    }
}

}  // namespace semrd
