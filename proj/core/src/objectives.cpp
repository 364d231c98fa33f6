#include "mfdl/objectives.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "mfdl/nn_graph.hpp"
#include "mfdl/rng.hpp"

namespace mfdl::objectives {

void Dataset::validate(bool binary_targets) const {
    if (m < 1 || d < 1) throw std::invalid_argument("dataset: need at least one row and column");
    if (x.size() != static_cast<std::size_t>(m) * d || y.size() != static_cast<std::size_t>(m))
        throw std::invalid_argument("dataset: shape mismatch");
    if (!all_finite(x) || !all_finite(y)) throw std::invalid_argument("dataset: non-finite entry");
    if (binary_targets)
        for (double t : y)
            if (t != 0.0 && t != 1.0)
                throw std::invalid_argument("dataset: targets must be binary");
}

Dataset load_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("csv: empty file");
    // header row discarded; column count inferred from the first data row
    Dataset ds;
    std::vector<double> row;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        row.clear();
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw std::runtime_error("csv: need at least one feature and a target");
        if (ds.d == 0)
            ds.d = static_cast<int>(row.size()) - 1;
        else if (static_cast<int>(row.size()) != ds.d + 1)
            throw std::runtime_error("csv: ragged row");
        for (int j = 0; j < ds.d; ++j) ds.x.push_back(row[j]);
        ds.y.push_back(row.back());
        ++ds.m;
    }
    ds.validate();
    return ds;
}

Dataset load_dataset_csv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("csv: cannot open '" + path + "'");
    return load_dataset_csv(f);
}

namespace {

// augmented design matrix [X, 1]
Mat design_matrix(const Dataset& data) {
    Mat a(data.m, data.d + 1);
    for (int i = 0; i < data.m; ++i) {
        for (int j = 0; j < data.d; ++j) a(i, j) = data.feature(i, j);
        a(i, data.d) = 1.0;
    }
    return a;
}

double softplus(double t) {
    if (t > 30.0) return t;
    if (t < -30.0) return std::exp(t);
    return std::log1p(std::exp(t));
}

double stable_sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

} // namespace

ObjectiveHandle least_squares(const Dataset& data) {
    data.validate();
    auto a = std::make_shared<Mat>(design_matrix(data));
    auto y = std::make_shared<Vec>(data.y);
    const int n = data.d + 1;

    ObjectiveHandle h;
    h.dimension = n;
    h.value = [a, y](const Vec& theta) {
        const Vec r = vdiff(*y, matvec(*a, theta));
        return 0.5 * dot(r, r);
    };
    h.grad = [a, y](const Vec& theta) {
        const Vec r = vdiff(matvec(*a, theta), *y); // A theta - Y
        return matvec(transpose(*a), r);
    };
    h.hvp = [a](const Vec&, const Vec& v) { return matvec(transpose(*a), matvec(*a, v)); };

    // normal equations A^T A theta = A^T Y; Cholesky with a relative pivot
    // tolerance flags rank deficiency
    Mat ata = matmul(transpose(*a), *a);
    Vec aty = matvec(transpose(*a), *y);
    try {
        const Mat l = cholesky(ata, 1e-12);
        const int nn = ata.rows;
        Vec w(nn);
        for (int i = 0; i < nn; ++i) {
            double s = aty[i];
            for (int k = 0; k < i; ++k) s -= l(i, k) * w[k];
            w[i] = s / l(i, i);
        }
        Vec sol(nn);
        for (int i = nn - 1; i >= 0; --i) {
            double s = w[i];
            for (int k = i + 1; k < nn; ++k) s -= l(k, i) * sol[k];
            sol[i] = s / l(i, i);
        }
        h.known_minimizer = sol;
        h.known_minimum = h.value(sol);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("least_squares: rank-deficient design matrix (singular normal equations)");
    }
    return h;
}

ObjectiveHandle logistic_nll(const Dataset& data) {
    data.validate(true);
    auto a = std::make_shared<Mat>(design_matrix(data));
    auto y = std::make_shared<Vec>(data.y);
    const int n = data.d + 1;

    ObjectiveHandle h;
    h.dimension = n;
    h.value = [a, y](const Vec& theta) {
        const Vec z = matvec(*a, theta);
        double s = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j)
            s += softplus(-z[j]) + (1.0 - (*y)[j]) * z[j];
        return s;
    };
    h.grad = [a, y](const Vec& theta) {
        const Vec z = matvec(*a, theta);
        Vec r(z.size());
        for (std::size_t j = 0; j < z.size(); ++j) r[j] = stable_sigmoid(z[j]) - (*y)[j];
        return matvec(transpose(*a), r);
    };
    h.hvp = [a](const Vec& theta, const Vec& v) {
        const Vec z = matvec(*a, theta);
        Vec av = matvec(*a, v);
        for (std::size_t j = 0; j < av.size(); ++j) {
            const double s = stable_sigmoid(z[j]);
            av[j] *= s * (1.0 - s);
        }
        return matvec(transpose(*a), av);
    };
    return h;
}

double SgFamily::component_value(int i, double x) const {
    const double r = x - z.at(i);
    return r * r;
}

double SgFamily::component_grad(int i, double x) const { return 2.0 * (x - z.at(i)); }

SgFamily sg_family(int n) {
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("sg_family: N must be odd and >= 3");
    SgFamily fam;
    fam.n = n;
    fam.z.resize(n);
    for (int i = 0; i < n; ++i) fam.z[i] = -1.0 + 2.0 * i / (n - 1);
    double zsq = 0.0;
    for (double zi : fam.z) zsq += zi * zi;
    zsq /= n;

    fam.average.dimension = 1;
    fam.average.value = [zsq](const Vec& x) { return x[0] * x[0] + zsq; };
    fam.average.grad = [](const Vec& x) { return Vec{2.0 * x[0]}; };
    fam.average.hvp = [](const Vec&, const Vec& v) { return Vec{2.0 * v[0]}; };
    fam.average.known_minimum = zsq;
    fam.average.known_minimizer = Vec{0.0};
    return fam;
}

FieldGraphs mlp_field(const nn::MlpSpec& spec, bool boundary_factor) {
    spec.validate();
    if (spec.hidden_activation.kind == nn::ActivationKind::Kind::relu)
        throw std::invalid_argument("pde field: ReLU activation has no Laplacian");
    FieldGraphs f;
    f.dim = spec.input_dim();
    f.n_params = spec.param_count();
    f.at = [spec, boundary_factor](const Vec& x) {
        return nn::mlp_laplacian_graph(spec, x, boundary_factor);
    };
    return f;
}

ObjectiveHandle pde_loss(PdeKind kind, const FieldGraphs& field,
                         std::function<double(const Vec&)> f_source, int sample_count,
                         std::uint64_t seed) {
    if (field.dim < 1 || field.dim > 3)
        throw std::invalid_argument("pde_loss: spatial dimension must be 1..3");
    if (sample_count < 1) throw std::invalid_argument("pde_loss: need at least one sample");

    // collocation points frozen at construction
    SplitRng rng(seed);
    auto points = std::make_shared<std::vector<Vec>>();
    auto source = std::make_shared<Vec>();
    auto graphs = std::make_shared<std::vector<autodiff::Graph>>();
    for (int i = 0; i < sample_count; ++i) {
        Vec x(field.dim);
        for (auto& xi : x) xi = rng.next_double();
        points->push_back(x);
        source->push_back(f_source(x));
        graphs->push_back(field.at(x));
    }

    const int d = field.dim;
    const int n = field.n_params;
    const double inv_n = 1.0 / sample_count;

    ObjectiveHandle h;
    h.dimension = n;
    if (kind == PdeKind::pinn_poisson) {
        h.value = [graphs, source, d, inv_n](const Vec& theta) {
            double loss = 0.0;
            for (std::size_t i = 0; i < graphs->size(); ++i) {
                const Vec out = autodiff::evaluate_all((*graphs)[i], theta);
                double lap = 0.0;
                for (int k = 0; k < d; ++k) lap += out[1 + d + k];
                const double r = lap + (*source)[i];
                loss += r * r;
            }
            return loss * inv_n;
        };
        h.grad = [graphs, source, d, n, inv_n](const Vec& theta) {
            Vec g(n, 0.0);
            for (std::size_t i = 0; i < graphs->size(); ++i) {
                const Vec out = autodiff::evaluate_all((*graphs)[i], theta);
                double lap = 0.0;
                for (int k = 0; k < d; ++k) lap += out[1 + d + k];
                const double r = lap + (*source)[i];
                Vec seed_vec(1 + 2 * d, 0.0);
                for (int k = 0; k < d; ++k) seed_vec[1 + d + k] = 2.0 * r * inv_n;
                const auto vjp = autodiff::reverse_vjp((*graphs)[i], theta, seed_vec);
                axpy(1.0, vjp.grad, g);
            }
            return g;
        };
    } else {
        h.value = [graphs, source, d, inv_n](const Vec& theta) {
            double loss = 0.0;
            for (std::size_t i = 0; i < graphs->size(); ++i) {
                const Vec out = autodiff::evaluate_all((*graphs)[i], theta);
                double e = 0.0;
                for (int k = 0; k < d; ++k) e += 0.5 * out[1 + k] * out[1 + k];
                e -= (*source)[i] * out[0];
                loss += e;
            }
            return loss * inv_n;
        };
        h.grad = [graphs, source, d, n, inv_n](const Vec& theta) {
            Vec g(n, 0.0);
            for (std::size_t i = 0; i < graphs->size(); ++i) {
                const Vec out = autodiff::evaluate_all((*graphs)[i], theta);
                Vec seed_vec(1 + 2 * d, 0.0);
                seed_vec[0] = -(*source)[i] * inv_n;
                for (int k = 0; k < d; ++k) seed_vec[1 + k] = out[1 + k] * inv_n;
                const auto vjp = autodiff::reverse_vjp((*graphs)[i], theta, seed_vec);
                axpy(1.0, vjp.grad, g);
            }
            return g;
        };
    }
    return h;
}

ObjectiveHandle rosenbrock() {
    ObjectiveHandle h;
    h.dimension = 2;
    h.value = [](const Vec& x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    h.grad = [](const Vec& x) {
        const double b = x[1] - x[0] * x[0];
        return Vec{-2.0 * (1.0 - x[0]) - 400.0 * x[0] * b, 200.0 * b};
    };
    h.hvp = [](const Vec& x, const Vec& v) {
        const double h00 = 2.0 - 400.0 * x[1] + 1200.0 * x[0] * x[0];
        const double h01 = -400.0 * x[0];
        return Vec{h00 * v[0] + h01 * v[1], h01 * v[0] + 200.0 * v[1]};
    };
    h.known_minimum = 0.0;
    h.known_minimizer = Vec{1.0, 1.0};
    return h;
}

} // namespace mfdl::objectives
