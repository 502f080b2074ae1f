#include "opbench/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "opbench/errors.hpp"

namespace opbench {

namespace {

constexpr char kDatasetMagic[4] = {'O', 'P', 'B', 'L'};
constexpr char kArchiveMagic[4] = {'O', 'P', 'B', 'A'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
    void f64s(std::span<const double> xs) {
        for (double x : xs) f64(x);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw DataError("write to '" + path.string() + "' failed");
    }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError("cannot open '" + path_ + "'");
        buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size())
            throw FormatError(FormatError::Kind::Truncated, "'" + path_ + "' is truncated at byte " +
                                                                std::to_string(buf_.size()));
    }
    void magic(const char (&expected)[4]) {
        need(4);
        if (std::memcmp(buf_.data() + pos_, expected, 4) != 0)
            throw FormatError(FormatError::Kind::BadMagic, "'" + path_ + "' has wrong magic bytes");
        pos_ += 4;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::vector<double> f64s(std::size_t n) {
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = std::bit_cast<double>(u64());
        return v;
    }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    void finish() const {
        if (pos_ != buf_.size())
            throw FormatError(FormatError::Kind::Malformed, "'" + path_ + "' has trailing bytes");
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
};

struct GridBlock {
    std::vector<std::size_t> points;
    std::size_t channels = 1;
};

void write_block(Writer& w, const Grid& g, std::size_t channels) {
    w.u32(static_cast<std::uint32_t>(g.dims()));
    for (int d = 0; d < g.dims(); ++d) w.u32(static_cast<std::uint32_t>(g.points(d)));
    w.u32(static_cast<std::uint32_t>(channels));
}

GridBlock read_block(Reader& r) {
    GridBlock b;
    const auto dims = r.u32();
    if (dims < 1 || dims > 2) throw FormatError(FormatError::Kind::Malformed, "'" + r.path() + "' has invalid grid dims");
    for (std::uint32_t d = 0; d < dims; ++d) b.points.push_back(r.u32());
    b.channels = r.u32();
    if (b.channels == 0) throw FormatError(FormatError::Kind::Malformed, "'" + r.path() + "' has zero channels");
    return b;
}

Grid resolve_grid(const GridBlock& b, const Metadata& meta, const std::string& key) {
    Grid g;
    if (auto it = meta.find(key); it != meta.end()) {
        g = parse_grid(it->second);
    } else {
        std::vector<double> ext(b.points.size(), 1.0);
        std::vector<Boundary> bnd(b.points.size(), Boundary::Neumann);
        g = Grid::make(static_cast<int>(b.points.size()), b.points, ext, bnd);
    }
    if (g.dims() != static_cast<int>(b.points.size()))
        throw FormatError(FormatError::Kind::Malformed, "grid metadata '" + key + "' disagrees with the header");
    for (int d = 0; d < g.dims(); ++d)
        if (g.points(d) != b.points[d])
            throw FormatError(FormatError::Kind::Malformed, "grid metadata '" + key + "' disagrees with the header");
    return g;
}

}  // namespace

std::string encode_metadata(const Metadata& meta) {
    std::string out;
    for (const auto& [k, v] : meta) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw UsageError("metadata entry '" + k + "' contains a reserved character");
        out += k + "=" + v + "\n";
    }
    return out;
}

Metadata decode_metadata(const std::string& text) {
    Metadata meta;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(FormatError::Kind::Malformed, "metadata line without '=': " + line);
        meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return meta;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    validate(ds);
    Metadata meta = ds.meta;
    Grid in_grid = Grid::line(2, 1.0, Boundary::Neumann);
    Grid out_grid = in_grid;
    std::size_t in_ch = 1, out_ch = 1;
    if (ds.size() > 0) {
        in_grid = ds.inputs[0].grid();
        out_grid = ds.outputs[0].grid();
        in_ch = ds.inputs[0].channels();
        out_ch = ds.outputs[0].channels();
        meta["input_grid"] = describe_grid(in_grid);
        meta["output_grid"] = describe_grid(out_grid);
    } else {
        if (auto it = meta.find("input_grid"); it != meta.end()) in_grid = parse_grid(it->second);
        if (auto it = meta.find("output_grid"); it != meta.end()) out_grid = parse_grid(it->second);
    }

    Writer w;
    w.bytes(kDatasetMagic, 4);
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    write_block(w, in_grid, in_ch);
    write_block(w, out_grid, out_ch);
    for (const auto& f : ds.inputs) w.f64s(f.values());
    for (const auto& f : ds.outputs) w.f64s(f.values());
    w.str(encode_metadata(meta));
    w.save(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
    Reader r(path);
    r.magic(kDatasetMagic);
    const auto version = r.u32();
    if (version != kDatasetVersion)
        throw FormatError(FormatError::Kind::VersionMismatch,
                          "'" + r.path() + "' has container version " + std::to_string(version) +
                              ", this reader understands " + std::to_string(kDatasetVersion));
    const auto n = r.u32();
    const auto in_block = read_block(r);
    const auto out_block = read_block(r);

    std::size_t in_np = 1, out_np = 1;
    for (auto p : in_block.points) in_np *= p;
    for (auto p : out_block.points) out_np *= p;

    std::vector<std::vector<double>> in_raw, out_raw;
    in_raw.reserve(n);
    out_raw.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) in_raw.push_back(r.f64s(in_np * in_block.channels));
    for (std::uint32_t i = 0; i < n; ++i) out_raw.push_back(r.f64s(out_np * out_block.channels));

    Dataset ds;
    ds.meta = decode_metadata(r.str());
    r.finish();

    const Grid in_grid = resolve_grid(in_block, ds.meta, "input_grid");
    const Grid out_grid = resolve_grid(out_block, ds.meta, "output_grid");
    for (auto& v : in_raw) ds.inputs.emplace_back(in_grid, in_block.channels, std::move(v));
    for (auto& v : out_raw) ds.outputs.emplace_back(out_grid, out_block.channels, std::move(v));
    return ds;
}

void write_field(const Field& f, const std::string& role, const std::filesystem::path& path) {
    Dataset ds;
    ds.inputs.push_back(f);
    ds.outputs.push_back(f);
    ds.meta["kind"] = "field";
    ds.meta["role"] = role;
    write_dataset(ds, path);
}

Field read_field(const std::filesystem::path& path) {
    auto ds = read_dataset(path);
    if (ds.size() != 1) throw FormatError(FormatError::Kind::Malformed, "'" + path.string() + "' is not a field file");
    return std::move(ds.inputs[0]);
}

void Archive::add(std::string name, std::vector<double> data) {
    arrays.push_back({std::move(name), std::move(data)});
}

bool Archive::contains(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return true;
    return false;
}

const std::vector<double>& Archive::get(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a.data;
    throw FormatError(FormatError::Kind::Malformed, "archive has no array '" + name + "'");
}

const std::string& Archive::meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw FormatError(FormatError::Kind::Malformed, "archive metadata lacks '" + key + "'");
    return it->second;
}

void write_archive(const Archive& a, const std::filesystem::path& path) {
    Writer w;
    w.bytes(kArchiveMagic, 4);
    w.u32(kArchiveVersion);
    w.u32(static_cast<std::uint32_t>(a.arrays.size()));
    for (const auto& arr : a.arrays) {
        w.str(arr.name);
        w.u64(arr.data.size());
        w.f64s(arr.data);
    }
    w.str(encode_metadata(a.meta));
    w.save(path);
}

Archive read_archive(const std::filesystem::path& path) {
    Reader r(path);
    r.magic(kArchiveMagic);
    const auto version = r.u32();
    if (version != kArchiveVersion)
        throw FormatError(FormatError::Kind::VersionMismatch,
                          "'" + r.path() + "' has archive version " + std::to_string(version));
    Archive a;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray arr;
        arr.name = r.str();
        const auto len = r.u64();
        arr.data = r.f64s(static_cast<std::size_t>(len));
        a.arrays.push_back(std::move(arr));
    }
    a.meta = decode_metadata(r.str());
    r.finish();
    return a;
}

}  // namespace opbench
