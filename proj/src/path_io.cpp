#include "spde/path_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace spde {

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u64(std::uint64_t v) {
        char b[8];
        for (int i = 0; i < 8; ++i) {
            b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
        }
        out_.write(b, 8);
    }
    void u32(std::uint32_t v) {
        char b[4];
        for (int i = 0; i < 4; ++i) {
            b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
        }
        out_.write(b, 4);
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint64_t u64() {
        unsigned char b[8];
        read(b, 8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | b[i];
        }
        return v;
    }
    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | b[i];
        }
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    void read(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw std::runtime_error("snapshot truncated");
        }
    }

private:
    std::istream& in_;
};

void write_block(Writer& w, std::uint64_t j, double t, const SpectralField& f) {
    w.u64(j);
    w.f64(t);
    w.i32(f.band());
    const auto x = f.x();
    const auto y = f.y();
    for (std::size_t k = 0; k < f.mode_count(); ++k) {
        w.f64(x[k].real());
        w.f64(x[k].imag());
        w.f64(y[k].real());
        w.f64(y[k].imag());
    }
}

SpectralField read_block(Reader& r, std::uint64_t& j, double& t) {
    j = r.u64();
    t = r.f64();
    const int band = r.i32();
    if (band < 0 || band > 4096) {
        throw std::runtime_error("snapshot block has invalid band");
    }
    SpectralField f(band);
    auto x = f.x();
    auto y = f.y();
    for (std::size_t k = 0; k < f.mode_count(); ++k) {
        const double xr = r.f64();
        const double xi = r.f64();
        const double yr = r.f64();
        const double yi = r.f64();
        x[k] = {xr, xi};
        y[k] = {yr, yi};
    }
    return f;
}

void write_series(Writer& w, const std::vector<double>& s) {
    w.u64(s.size());
    for (double v : s) {
        w.f64(v);
    }
}

std::vector<double> read_series(Reader& r, std::uint64_t limit) {
    const std::uint64_t n = r.u64();
    if (n > limit) {
        throw std::runtime_error("snapshot series longer than the grid");
    }
    std::vector<double> s(n);
    for (auto& v : s) {
        v = r.f64();
    }
    return s;
}

}  // namespace

void write_snapshot(std::ostream& out, const PathRecord& path) {
    Writer w(out);
    w.bytes(kSnapshotMagic, sizeof kSnapshotMagic);
    w.u32(kSnapshotVersion);
    w.i32(path.level);
    w.u64(path.steps);
    w.f64(path.dt);
    w.f64(path.T);
    w.u64(path.seed);
    w.u32(path.scheme == Scheme::EulerIto ? 0u : 1u);
    w.i32(path.noise_count);
    w.f64(path.M);
    w.f64(path.R);
    w.f64(path.baseline);
    w.i64(path.hit_index ? static_cast<std::int64_t>(*path.hit_index) : -1);
    w.u32(path.blown_up ? 1u : 0u);
    w.f64(path.blowup_time);
    w.u64(path.state_stride);

    write_series(w, path.norm_u2);
    write_series(w, path.norm_h2);
    write_series(w, path.norm_v2);

    if (path.state_stride > 0 && !path.states.empty()) {
        w.u64(path.states.size());
        for (std::size_t b = 0; b < path.states.size(); ++b) {
            const std::size_t j = b * path.state_stride;
            write_block(w, j, path.time(j), path.states[b]);
        }
    } else {
        w.u64(2);
        write_block(w, 0, 0.0, path.initial);
        write_block(w, path.steps, path.T, path.final_state);
    }
    if (!out) {
        throw std::runtime_error("snapshot write failed");
    }
}

void write_snapshot(const std::filesystem::path& file, const PathRecord& path) {
    std::ofstream out(file, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + file.string() + " for writing");
    }
    write_snapshot(out, path);
}

PathRecord read_snapshot(std::istream& in) {
    Reader r(in);
    char magic[8];
    r.read(magic, 8);
    if (std::memcmp(magic, kSnapshotMagic, 8) != 0) {
        throw std::runtime_error("not a snapshot (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kSnapshotVersion) {
        throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
    }
    PathRecord p;
    p.level = r.i32();
    p.steps = r.u64();
    p.dt = r.f64();
    p.T = r.f64();
    p.seed = r.u64();
    p.scheme = r.u32() == 0 ? Scheme::EulerIto : Scheme::HeunStratonovich;
    p.noise_count = r.i32();
    p.M = r.f64();
    p.R = r.f64();
    p.baseline = r.f64();
    const std::int64_t hit = r.i64();
    if (hit >= 0) {
        p.hit_index = static_cast<std::size_t>(hit);
    }
    p.blown_up = r.u32() != 0;
    p.blowup_time = r.f64();
    p.state_stride = r.u64();

    p.norm_u2 = read_series(r, p.steps + 1);
    p.norm_h2 = read_series(r, p.steps + 1);
    p.norm_v2 = read_series(r, p.steps + 1);

    const std::uint64_t blocks = r.u64();
    if (blocks > p.steps + 1) {
        throw std::runtime_error("snapshot has more blocks than grid points");
    }
    std::vector<SpectralField> fields;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        std::uint64_t j = 0;
        double t = 0.0;
        fields.push_back(read_block(r, j, t));
    }
    if (p.state_stride > 0) {
        p.states = fields;
    }
    if (!fields.empty()) {
        p.initial = fields.front();
        p.final_state = fields.back();
    }
    return p;
}

PathRecord read_snapshot(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + file.string());
    }
    return read_snapshot(in);
}

void write_norm_csv(std::ostream& out, const PathRecord& path) {
    out << "t,normU,normH,normV,uh,hv,hit\n";
    const auto hit = path.hit_index;
    const auto uh = uh_functional_series(path);
    const auto hv = hv_functional_series(path);
    for (std::size_t j = 0; j < path.norm_u2.size(); ++j) {
        out << format_double(path.time(j)) << ',' << format_double(std::sqrt(path.norm_u2[j]))
            << ',' << format_double(std::sqrt(path.norm_h2[j])) << ','
            << format_double(std::sqrt(path.norm_v2[j])) << ','
            << format_double(uh[j]) << ','
            << format_double(hv[j]) << ',' << (hit && j >= *hit ? 1 : 0)
            << '\n';
    }
}

void write_norm_csv(const std::filesystem::path& file, const PathRecord& path) {
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot open " + file.string() + " for writing");
    }
    write_norm_csv(out, path);
}

}  // namespace spde
