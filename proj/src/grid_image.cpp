#include "stml/grid_image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <optional>
#include <sstream>

namespace stml {

Grid::Grid(std::vector<int> dims, std::vector<double> spacing, std::vector<double> origin)
    : dims_(std::move(dims)), spacing_(std::move(spacing)), origin_(std::move(origin)) {
    if (dims_.size() < 1 || dims_.size() > 3) {
        throw std::invalid_argument("Grid: spatial dimension must be 1, 2 or 3");
    }
    if (spacing_.size() != dims_.size() || origin_.size() != dims_.size()) {
        throw std::invalid_argument("Grid: dims, spacing and origin must have equal length");
    }
    for (std::size_t a = 0; a < dims_.size(); ++a) {
        if (dims_[a] < 2) throw std::invalid_argument("Grid: every dimension must be >= 2");
        if (!(spacing_[a] > 0.0) || !std::isfinite(spacing_[a])) {
            throw std::invalid_argument("Grid: spacing must be positive and finite");
        }
        if (!std::isfinite(origin_[a])) throw std::invalid_argument("Grid: origin must be finite");
    }
}

std::size_t Grid::cell_count() const {
    std::size_t count = 1;
    for (int d : dims_) count *= static_cast<std::size_t>(d);
    return count;
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (double s : spacing_) v *= s;
    return v;
}

std::vector<double> Grid::center() const {
    std::vector<double> c(dims_.size());
    for (std::size_t a = 0; a < dims_.size(); ++a) c[a] = origin_[a] + 0.5 * dims_[a] * spacing_[a];
    return c;
}

std::vector<double> Grid::half_extent() const {
    std::vector<double> e(dims_.size());
    for (std::size_t a = 0; a < dims_.size(); ++a) e[a] = 0.5 * dims_[a] * spacing_[a];
    return e;
}

Image::Image(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.cell_count()) {
        throw std::invalid_argument("Image: value count does not match grid");
    }
    if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
        throw std::invalid_argument("Image: values must be finite");
    }
}

ImageSequence::ImageSequence(std::vector<Image> frames, std::vector<double> times)
    : frames_(std::move(frames)), times_(std::move(times)) {
    if (frames_.size() < 2) throw std::invalid_argument("ImageSequence: need at least two frames");
    if (times_.size() != frames_.size()) throw std::invalid_argument("ImageSequence: one time per frame");
    for (const auto& f : frames_) {
        if (!(f.grid() == frames_.front().grid())) {
            throw std::invalid_argument("ImageSequence: frames must share one grid");
        }
    }
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i])) throw std::invalid_argument("ImageSequence: times must be finite");
        if (i > 0 && !(times_[i] > times_[i - 1])) {
            throw std::invalid_argument("ImageSequence: times must be strictly increasing");
        }
    }
}

PointSet cell_centers(const Grid& grid) {
    const int d = grid.dim();
    const std::size_t count = grid.cell_count();
    PointSet pts{d, std::vector<double>(count * static_cast<std::size_t>(d))};
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t c = 0; c < count; ++c) {
        for (int a = 0; a < d; ++a) {
            pts.coords[c * d + a] = grid.origin()[a] + (idx[a] + 0.5) * grid.spacing()[a];
        }
        for (int a = 0; a < d; ++a) {
            if (++idx[a] < grid.dims()[a]) break;
            idx[a] = 0;
        }
    }
    return pts;
}

namespace {

// Evaluates one point; grad may be null.
double interpolate(const Image& image, std::span<const double> x, double* grad) {
    const Grid& g = image.grid();
    const int d = g.dim();
    const auto& dims = g.dims();
    const auto& vals = image.values();

    int base[3];
    double frac[3];
    for (int a = 0; a < d; ++a) {
        const double u = (x[a] - g.origin()[a]) / g.spacing()[a] - 0.5;
        const double fl = std::floor(u);
        if (!(fl >= -1.0) || fl > dims[a] - 1) {
            if (grad) std::fill(grad, grad + d, 0.0);
            return 0.0;
        }
        base[a] = static_cast<int>(fl);
        frac[a] = u - fl;
    }

    double value = 0.0;
    double dgrad[3] = {0.0, 0.0, 0.0};
    const int corners = 1 << d;
    for (int mask = 0; mask < corners; ++mask) {
        std::size_t offset = 0;
        std::size_t stride = 1;
        bool inside = true;
        for (int a = 0; a < d; ++a) {
            const int i = base[a] + ((mask >> a) & 1);
            if (i < 0 || i >= dims[a]) {
                inside = false;
                break;
            }
            offset += static_cast<std::size_t>(i) * stride;
            stride *= static_cast<std::size_t>(dims[a]);
        }
        if (!inside) continue;
        const double v = vals[offset];
        double w = 1.0;
        for (int a = 0; a < d; ++a) w *= ((mask >> a) & 1) ? frac[a] : 1.0 - frac[a];
        value += w * v;
        if (grad) {
            for (int a = 0; a < d; ++a) {
                double wa = ((mask >> a) & 1) ? 1.0 : -1.0;
                for (int b = 0; b < d; ++b) {
                    if (b != a) wa *= ((mask >> b) & 1) ? frac[b] : 1.0 - frac[b];
                }
                dgrad[a] += wa * v;
            }
        }
    }
    if (grad) {
        for (int a = 0; a < d; ++a) grad[a] = dgrad[a] / g.spacing()[a];
    }
    return value;
}

void require_dim(const Image& image, const PointSet& points) {
    if (points.dim != image.grid().dim()) {
        throw std::invalid_argument("sample: point dimension does not match image");
    }
}

}  // namespace

std::vector<double> sample(const Image& image, const PointSet& points) {
    require_dim(image, points);
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = interpolate(image, points[i], nullptr);
    return out;
}

SampledField sample_with_gradient(const Image& image, const PointSet& points) {
    require_dim(image, points);
    const auto d = static_cast<std::size_t>(points.dim);
    SampledField out{std::vector<double>(points.size()), std::vector<double>(points.size() * d)};
    for (std::size_t i = 0; i < points.size(); ++i) {
        out.values[i] = interpolate(image, points[i], out.gradients.data() + i * d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// STSQ1

namespace {

constexpr const char* kMagic = "STSQ1";

std::string format_reals(const std::vector<double>& v) {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
    return os.str();
}

std::uint32_t to_little_endian(std::uint32_t bits) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
    }
    return bits;
}

template <typename T>
std::vector<T> parse_values(const std::string& line, const std::string& key) {
    const std::string prefix = key + ":";
    if (line.rfind(prefix, 0) != 0) {
        throw SequenceFormatError(SequenceFormatError::Kind::malformed_header,
                                  "STSQ1: expected '" + prefix + "' line, got '" + line + "'");
    }
    std::istringstream is(line.substr(prefix.size()));
    std::vector<T> out;
    std::string token;
    while (is >> token) {
        std::istringstream ts(token);
        T v{};
        ts >> v;
        if (ts.fail() || !ts.eof()) {
            throw SequenceFormatError(SequenceFormatError::Kind::malformed_header,
                                      "STSQ1: bad number '" + token + "' in '" + key + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

void write_sequence(const ImageSequence& seq, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw SequenceFormatError(SequenceFormatError::Kind::io, "cannot open " + path.string());

    const Grid& g = seq.grid();
    std::vector<double> dims(g.dims().begin(), g.dims().end());
    std::ostringstream header;
    header << kMagic << "\n";
    header << "dims:";
    for (int d : g.dims()) header << " " << d;
    header << "\n";
    header << "spacing: " << format_reals(g.spacing()) << "\n";
    header << "origin: " << format_reals(g.origin()) << "\n";
    header << "frames: " << seq.size() << "\n";
    header << "times: " << format_reals(seq.times()) << "\n\n";
    const std::string h = header.str();
    os.write(h.data(), static_cast<std::streamsize>(h.size()));

    std::vector<char> buf(g.cell_count() * 4);
    for (const auto& frame : seq.frames()) {
        for (std::size_t i = 0; i < frame.values().size(); ++i) {
            const auto f = static_cast<float>(frame.values()[i]);
            const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(f));
            std::memcpy(buf.data() + 4 * i, &bits, 4);
        }
        os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw SequenceFormatError(SequenceFormatError::Kind::io, "write failed for " + path.string());
}

ImageSequence read_sequence(const std::filesystem::path& path) {
    using Kind = SequenceFormatError::Kind;
    std::ifstream is(path, std::ios::binary);
    if (!is) throw SequenceFormatError(Kind::io, "cannot open " + path.string());
    const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

    const auto header_end = data.find("\n\n");
    if (data.rfind(std::string(kMagic) + "\n", 0) != 0) {
        throw SequenceFormatError(Kind::malformed_header, "STSQ1: missing magic string");
    }
    if (header_end == std::string::npos) {
        throw SequenceFormatError(Kind::malformed_header, "STSQ1: header not terminated by a blank line");
    }

    std::vector<std::string> lines;
    {
        std::istringstream hs(data.substr(0, header_end));
        std::string line;
        while (std::getline(hs, line)) lines.push_back(line);
    }
    if (lines.size() != 6) {
        throw SequenceFormatError(Kind::malformed_header, "STSQ1: expected 6 header lines");
    }
    const auto dims = parse_values<int>(lines[1], "dims");
    const auto spacing = parse_values<double>(lines[2], "spacing");
    const auto origin = parse_values<double>(lines[3], "origin");
    const auto frames = parse_values<long>(lines[4], "frames");
    const auto times = parse_values<double>(lines[5], "times");

    if (dims.size() < 2 || dims.size() > 3) {
        throw SequenceFormatError(Kind::dimension_mismatch, "STSQ1: dims must list 2 or 3 axes");
    }
    if (spacing.size() != dims.size() || origin.size() != dims.size()) {
        throw SequenceFormatError(Kind::dimension_mismatch, "STSQ1: spacing/origin do not match dims");
    }
    if (frames.size() != 1 || frames[0] < 2) {
        throw SequenceFormatError(Kind::malformed_header, "STSQ1: bad frame count");
    }
    const auto n = static_cast<std::size_t>(frames[0]);
    if (times.size() != n) {
        throw SequenceFormatError(Kind::dimension_mismatch, "STSQ1: times count does not match frames");
    }

    std::optional<Grid> grid;
    try {
        grid.emplace(dims, spacing, origin);
    } catch (const std::invalid_argument& e) {
        throw SequenceFormatError(Kind::malformed_header, std::string("STSQ1: ") + e.what());
    }

    const std::size_t cells = grid->cell_count();
    const std::size_t payload = data.size() - (header_end + 2);
    const std::size_t expected = n * cells * 4;
    if (payload < expected) {
        throw SequenceFormatError(Kind::truncated_payload, "STSQ1: payload has " + std::to_string(payload) +
                                                               " bytes, expected " + std::to_string(expected));
    }
    if (payload > expected) {
        throw SequenceFormatError(Kind::dimension_mismatch, "STSQ1: payload longer than declared dimensions");
    }

    const char* p = data.data() + header_end + 2;
    std::vector<Image> images;
    images.reserve(n);
    try {
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> values(cells);
            for (std::size_t i = 0; i < cells; ++i, p += 4) {
                std::uint32_t bits;
                std::memcpy(&bits, p, 4);
                values[i] = static_cast<double>(std::bit_cast<float>(to_little_endian(bits)));
            }
            images.emplace_back(*grid, std::move(values));
        }
        return ImageSequence(std::move(images), times);
    } catch (const std::invalid_argument& e) {
        throw SequenceFormatError(Kind::malformed_header, std::string("STSQ1: ") + e.what());
    }
}

}  // namespace stml
