#include "stml/transform.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace stml {

Eigen::VectorXd Affine::params() const {
    const int d = dim();
    Eigen::VectorXd p(param_count(d));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) p(i * d + j) = matrix(i, j);
    }
    p.tail(d) = translation;
    return p;
}

Affine Affine::from_params(int d, const Eigen::Ref<const Eigen::VectorXd>& p) {
    if (p.size() != param_count(d)) throw std::invalid_argument("Affine::from_params: wrong parameter count");
    Affine t{Eigen::MatrixXd(d, d), p.tail(d)};
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) t.matrix(i, j) = p(i * d + j);
    }
    return t;
}

Affine Affine::compose(const Affine& other) const {
    return Affine{matrix * other.matrix, matrix * other.translation + translation};
}

Affine Affine::inverse() const {
    const Eigen::MatrixXd inv = matrix.inverse();
    return Affine{inv, -inv * translation};
}

Affine identity_affine(int d) {
    if (d != 2 && d != 3) throw std::invalid_argument("identity_affine: d must be 2 or 3");
    return Affine{Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d)};
}

PointSet apply_affine(const Affine& t, const PointSet& points) {
    const int d = t.dim();
    if (points.dim != d) throw std::invalid_argument("apply_affine: dimension mismatch");
    PointSet out{d, std::vector<double>(points.coords.size())};
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double* x = points.coords.data() + i * d;
        double* y = out.coords.data() + i * d;
        for (int r = 0; r < d; ++r) {
            double acc = t.translation(r);
            for (int c = 0; c < d; ++c) acc += t.matrix(r, c) * x[c];
            y[r] = acc;
        }
    }
    return out;
}

Image transform_image(const Image& img, const Affine& t) {
    return Image(img.grid(), sample(img, apply_affine(t, cell_centers(img.grid()))));
}

AffineStack::AffineStack(int frame_count, int dim) : frame_count_(frame_count), dim_(dim) {
    if (frame_count < 1) throw std::invalid_argument("AffineStack: frame_count must be positive");
    if (dim != 2 && dim != 3) throw std::invalid_argument("AffineStack: dim must be 2 or 3");
}

AffineStack AffineStack::identity(int frame_count, int dim, std::span<const int> frames) {
    AffineStack y(frame_count, dim);
    for (int k : frames) y.set(k, identity_affine(dim));
    return y;
}

AffineStack AffineStack::identity(int frame_count, int dim) {
    AffineStack y(frame_count, dim);
    for (int k = 1; k <= frame_count; ++k) y.set(k, identity_affine(dim));
    return y;
}

void AffineStack::set(int k, Affine t) {
    if (k < 1 || k > frame_count_) throw std::out_of_range("AffineStack: frame index out of range");
    if (t.dim() != dim_ || t.matrix.rows() != dim_ || t.matrix.cols() != dim_) {
        throw std::invalid_argument("AffineStack: dimension mismatch");
    }
    items_.insert_or_assign(k, std::move(t));
}

std::vector<int> AffineStack::indices() const {
    std::vector<int> out;
    out.reserve(items_.size());
    for (const auto& [k, _] : items_) out.push_back(k);
    return out;
}

AffineStack AffineStack::restricted(std::span<const int> frames) const {
    AffineStack out(frame_count_, dim_);
    for (int k : frames) out.set(k, at(k));
    return out;
}

double stack_norm(const AffineStack& y) {
    double sq = 0.0;
    for (const auto& [k, t] : y.items()) sq += t.params().squaredNorm();
    return std::sqrt(sq);
}

double stack_diff_norm(const AffineStack& a, const AffineStack& b) {
    if (a.dim() != b.dim() || a.frame_count() != b.frame_count()) {
        throw std::invalid_argument("stack_diff_norm: stacks have different shapes");
    }
    double sq = 0.0;
    for (const auto& [k, t] : a.items()) {
        if (b.contains(k)) sq += (t.params() - b.at(k).params()).squaredNorm();
    }
    return std::sqrt(sq);
}

void write_stack(std::ostream& os, const AffineStack& y) {
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    for (const auto& [k, t] : y.items()) {
        os << k << ":";
        const Eigen::VectorXd p = t.params();
        for (Eigen::Index i = 0; i < p.size(); ++i) os << ' ' << p(i);
        os << '\n';
    }
    os.precision(old);
}

AffineStack read_stack(std::istream& is, int frame_count) {
    std::string line;
    std::optional<AffineStack> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw std::runtime_error("read_stack: missing ':' in '" + line + "'");
        const int k = std::stoi(line.substr(0, colon));
        std::istringstream ls(line.substr(colon + 1));
        std::vector<double> vals;
        double v;
        while (ls >> v) vals.push_back(v);
        if (!ls.eof()) throw std::runtime_error("read_stack: bad number in '" + line + "'");
        int d = 0;
        if (vals.size() == 6) d = 2;
        else if (vals.size() == 12) d = 3;
        else throw std::runtime_error("read_stack: expected 6 or 12 parameters in '" + line + "'");
        if (!out) out.emplace(frame_count, d);
        out->set(k, Affine::from_params(d, Eigen::Map<Eigen::VectorXd>(vals.data(), d * d + d)));
    }
    if (!out) throw std::runtime_error("read_stack: empty input");
    return *out;
}

void write_stack(const std::filesystem::path& path, const AffineStack& y) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string());
    write_stack(os, y);
}

AffineStack read_stack(const std::filesystem::path& path, int frame_count) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_stack(is, frame_count);
}

}  // namespace stml
