#include "opbench/field.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "opbench/errors.hpp"

namespace opbench {

std::string to_string(Boundary b) { return b == Boundary::Periodic ? "periodic" : "neumann"; }

Boundary boundary_from_string(const std::string& s) {
    if (s == "periodic") return Boundary::Periodic;
    if (s == "neumann") return Boundary::Neumann;
    throw UsageError("unknown boundary kind '" + s + "'");
}

Grid Grid::make(int dims, std::span<const std::size_t> points, std::span<const double> extents,
                std::span<const Boundary> boundaries) {
    if (dims < 1 || dims > kMaxDims) throw UsageError("grid dims must be 1 or 2, got " + std::to_string(dims));
    const auto n = static_cast<std::size_t>(dims);
    if (points.size() != n || extents.size() != n || boundaries.size() != n)
        throw UsageError("grid description has the wrong number of dimensions");
    Grid g;
    g.dims_ = dims;
    for (std::size_t d = 0; d < n; ++d) {
        if (points[d] < 2) throw UsageError("grid needs at least 2 points per dimension");
        if (!(extents[d] > 0.0) || !std::isfinite(extents[d]))
            throw UsageError("grid extents must be positive");
        g.points_[d] = points[d];
        g.extents_[d] = extents[d];
        g.boundaries_[d] = boundaries[d];
    }
    return g;
}

Grid Grid::line(std::size_t n, double extent, Boundary b) {
    const std::size_t p[] = {n};
    const double e[] = {extent};
    const Boundary k[] = {b};
    return make(1, p, e, k);
}

Grid Grid::square(std::size_t n, double extent, Boundary b) {
    const std::size_t p[] = {n, n};
    const double e[] = {extent, extent};
    const Boundary k[] = {b, b};
    return make(2, p, e, k);
}

bool Grid::periodic() const noexcept {
    for (int d = 0; d < dims_; ++d)
        if (boundaries_[d] != Boundary::Periodic) return false;
    return dims_ > 0;
}

double Grid::spacing(int d) const {
    const auto n = static_cast<double>(points_[d]);
    return boundaries_[d] == Boundary::Periodic ? extents_[d] / n : extents_[d] / (n - 1.0);
}

std::size_t Grid::size() const noexcept {
    if (dims_ == 0) return 0;
    return dims_ == 1 ? points_[0] : points_[0] * points_[1];
}

std::array<std::size_t, Grid::kMaxDims> Grid::index(std::size_t linear) const {
    if (dims_ == 1) return {linear, 0};
    return {linear / points_[1], linear % points_[1]};
}

std::array<double, Grid::kMaxDims> Grid::coordinate(std::size_t linear) const {
    const auto idx = index(linear);
    std::array<double, kMaxDims> x{0.0, 0.0};
    for (int d = 0; d < dims_; ++d) x[d] = static_cast<double>(idx[d]) * spacing(d);
    return x;
}

double Grid::weight(std::size_t linear) const {
    const auto idx = index(linear);
    double w = 1.0;
    for (int d = 0; d < dims_; ++d) {
        double wd = spacing(d);
        if (boundaries_[d] != Boundary::Periodic && (idx[d] == 0 || idx[d] + 1 == points_[d])) wd *= 0.5;
        w *= wd;
    }
    return w;
}

std::vector<double> Grid::weights() const {
    std::vector<double> w(size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] = weight(p);
    return w;
}

double Grid::measure() const {
    double m = 1.0;
    for (int d = 0; d < dims_; ++d) m *= extents_[d];
    return m;
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double x = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && *first == ' ') ++first;
    if (first < last && *first == '+') ++first;
    auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last) throw UsageError("not a number: '" + s + "'");
    return x;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

}  // namespace

std::string describe_grid(const Grid& g) {
    std::string pts, ext, bnd;
    for (int d = 0; d < g.dims(); ++d) {
        const char* sep = d == 0 ? "" : ",";
        pts += sep + std::to_string(g.points(d));
        ext += sep + format_double(g.extent(d));
        bnd += sep + to_string(g.boundary(d));
    }
    return std::to_string(g.dims()) + ";" + pts + ";" + ext + ";" + bnd;
}

Grid parse_grid(const std::string& s) {
    const auto parts = split(s, ';');
    if (parts.size() != 4) throw DataError("malformed grid description '" + s + "'");
    const int dims = std::stoi(parts[0]);
    std::vector<std::size_t> pts;
    std::vector<double> ext;
    std::vector<Boundary> bnd;
    for (const auto& p : split(parts[1], ',')) pts.push_back(static_cast<std::size_t>(std::stoull(p)));
    for (const auto& e : split(parts[2], ',')) ext.push_back(parse_double(e));
    for (const auto& b : split(parts[3], ',')) bnd.push_back(boundary_from_string(b));
    return Grid::make(dims, pts, ext, bnd);
}

Field::Field(Grid grid, std::size_t channels, std::vector<double> values)
    : grid_(std::move(grid)), channels_(channels), values_(std::move(values)) {
    if (channels_ == 0) throw ShapeError("field needs at least one channel");
    if (values_.size() != grid_.size() * channels_)
        throw ShapeError("field has " + std::to_string(values_.size()) + " values, expected " +
                         std::to_string(grid_.size() * channels_));
    for (double v : values_)
        if (!std::isfinite(v)) throw NumericError("field contains non-finite values");
}

Field Field::zeros(const Grid& grid, std::size_t channels) {
    return Field(grid, channels, std::vector<double>(grid.size() * channels, 0.0));
}

namespace {

void require_compatible(const Field& a, const Field& b) {
    if (!(a.grid() == b.grid()) || a.channels() != b.channels())
        throw ShapeError("fields live on different grids or have different channel counts");
}

}  // namespace

Field operator+(const Field& a, const Field& b) {
    require_compatible(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
    return Field(a.grid(), a.channels(), std::move(v));
}

Field operator-(const Field& a, const Field& b) {
    require_compatible(a, b);
    std::vector<double> v(a.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] - b.values()[i];
    return Field(a.grid(), a.channels(), std::move(v));
}

Field operator*(double s, const Field& f) {
    std::vector<double> v(f.values().begin(), f.values().end());
    for (double& x : v) x *= s;
    return Field(f.grid(), f.channels(), std::move(v));
}

double l2_inner(const Field& f, const Field& g) {
    require_compatible(f, g);
    const auto& grid = f.grid();
    const std::size_t c = f.channels();
    const auto fv = f.values();
    const auto gv = g.values();
    double sum = 0.0;
    for (std::size_t p = 0; p < grid.size(); ++p) {
        double local = 0.0;
        for (std::size_t k = 0; k < c; ++k) local += fv[p * c + k] * gv[p * c + k];
        sum += grid.weight(p) * local;
    }
    return sum;
}

double l2_norm(const Field& f) { return std::sqrt(l2_inner(f, f)); }

double relative_l2_error(const Field& pred, const Field& truth) {
    const double denom = l2_norm(truth);
    if (!(denom > 0.0)) throw NumericError("relative error undefined for a zero-norm reference field");
    return l2_norm(pred - truth) / denom;
}

void validate(const Dataset& ds) {
    if (ds.inputs.size() != ds.outputs.size())
        throw ShapeError("dataset has " + std::to_string(ds.inputs.size()) + " inputs but " +
                         std::to_string(ds.outputs.size()) + " outputs");
    for (std::size_t n = 1; n < ds.inputs.size(); ++n) {
        if (!(ds.inputs[n].grid() == ds.inputs[0].grid()) || ds.inputs[n].channels() != ds.inputs[0].channels())
            throw ShapeError("dataset inputs do not share one grid");
        if (!(ds.outputs[n].grid() == ds.outputs[0].grid()) ||
            ds.outputs[n].channels() != ds.outputs[0].channels())
            throw ShapeError("dataset outputs do not share one grid");
    }
}

}  // namespace opbench
