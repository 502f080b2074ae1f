#pragma once

// Uniform grids, sampled fields and the paired-sample dataset shared by every
// other module. Linear point index is row-major (last dimension fastest) and
// field values are stored point-major: values[point * channels + channel].

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace opbench {

enum class Boundary { Periodic, Neumann };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

class Grid {
public:
    static constexpr int kMaxDims = 2;

    Grid() = default;

    /// Validates and builds a grid. Throws UsageError for dims outside {1,2},
    /// fewer than 2 points or non-positive extents.
    static Grid make(int dims, std::span<const std::size_t> points, std::span<const double> extents,
                     std::span<const Boundary> boundaries);

    static Grid line(std::size_t n, double extent, Boundary b);
    static Grid square(std::size_t n, double extent, Boundary b);

    int dims() const noexcept { return dims_; }
    std::size_t points(int d) const { return points_[d]; }
    double extent(int d) const { return extents_[d]; }
    Boundary boundary(int d) const { return boundaries_[d]; }
    bool periodic() const noexcept;

    /// extent / points for periodic dimensions, extent / (points - 1) otherwise.
    double spacing(int d) const;

    /// Total point count N_p.
    std::size_t size() const noexcept;

    /// Multi-index of a linear index, last dimension fastest.
    std::array<std::size_t, kMaxDims> index(std::size_t linear) const;
    std::array<double, kMaxDims> coordinate(std::size_t linear) const;

    /// Quadrature weight of one point: cell volume for periodic dimensions,
    /// trapezoidal weight for non-periodic ones.
    double weight(std::size_t linear) const;
    std::vector<double> weights() const;

    /// Lebesgue measure of the domain.
    double measure() const;

    bool operator==(const Grid& other) const = default;

private:
    int dims_ = 0;
    std::array<std::size_t, kMaxDims> points_{1, 1};
    std::array<double, kMaxDims> extents_{1.0, 1.0};
    std::array<Boundary, kMaxDims> boundaries_{Boundary::Periodic, Boundary::Periodic};
};

/// Grid description used in metadata, e.g. "2;64,64;6.2831853071795862,6.2831853071795862;periodic,periodic".
std::string describe_grid(const Grid& g);
Grid parse_grid(const std::string& s);

class Field {
public:
    Field() = default;

    /// Throws ShapeError on a length mismatch and NumericError on non-finite entries.
    Field(Grid grid, std::size_t channels, std::vector<double> values);

    static Field zeros(const Grid& grid, std::size_t channels = 1);

    template <class Fn>
    static Field from_function(const Grid& grid, Fn&& fn) {
        std::vector<double> v(grid.size());
        for (std::size_t p = 0; p < v.size(); ++p) v[p] = fn(grid.coordinate(p));
        return Field(grid, 1, std::move(v));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator()(std::size_t point, std::size_t channel = 0) const {
        return values_[point * channels_ + channel];
    }

    bool operator==(const Field& other) const = default;

private:
    Grid grid_;
    std::size_t channels_ = 0;
    std::vector<double> values_;
};

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double s, const Field& f);

/// Quadrature approximation of the L2(D; R^c) inner product.
double l2_inner(const Field& f, const Field& g);
double l2_norm(const Field& f);

/// ||pred - truth|| / ||truth||. Throws NumericError if truth has zero norm.
double relative_l2_error(const Field& pred, const Field& truth);

using Metadata = std::map<std::string, std::string>;

struct Dataset {
    std::vector<Field> inputs;
    std::vector<Field> outputs;
    Metadata meta;

    std::size_t size() const noexcept { return inputs.size(); }
};

/// Checks equal lengths and shared grids; throws ShapeError otherwise.
void validate(const Dataset& ds);

/// Shortest representation that parses back to the identical double.
std::string format_double(double x);
double parse_double(const std::string& s);

}  // namespace opbench
