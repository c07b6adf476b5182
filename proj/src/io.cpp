#include "medirl/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace medirl {

namespace {

constexpr std::uint16_t kFtenVersion = 1;
constexpr std::uint8_t kDtypeF32 = 1;

void put_u16(std::string& out, std::uint16_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t off = 0;
    std::string path;

    void need(std::size_t k, const char* what) {
        if (off + k > n) throw IoError("FTEN truncated (" + std::string(what) + "): " + path);
    }
    std::uint16_t u16() {
        need(2, "u16");
        std::uint16_t x = static_cast<std::uint16_t>(p[off]) |
                          static_cast<std::uint16_t>(p[off + 1]) << 8;
        off += 2;
        return x;
    }
    std::uint8_t u8() {
        need(1, "u8");
        return p[off++];
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
        off += 4;
        return x;
    }
    std::uint64_t u64() {
        need(8, "u64");
        std::uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[off + i]) << (8 * i);
        off += 8;
        return x;
    }
};

float f32_from_le(const unsigned char* b) {
    std::uint32_t u = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
                      static_cast<std::uint32_t>(b[2]) << 16 |
                      static_cast<std::uint32_t>(b[3]) << 24;
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

void f32_to_le(float f, std::string& out) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(out, u);
}

}  // namespace

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tensor file: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0, path.string()};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), "FTEN", 4) != 0)
        throw IoError("bad magic in tensor file: " + path.string());
    r.off = 4;
    std::uint16_t version = r.u16();
    if (version != kFtenVersion)
        throw IoError("unsupported FTEN version " + std::to_string(version) + ": " + path.string());
    std::uint8_t dtype = r.u8();
    if (dtype != kDtypeF32)
        throw IoError("unsupported FTEN dtype " + std::to_string(dtype) + ": " + path.string());
    std::uint8_t ndim = r.u8();
    std::vector<std::uint32_t> dims(ndim);
    std::uint64_t prod = 1;
    for (int i = 0; i < ndim; ++i) {
        dims[i] = r.u32();
        prod *= dims[i];
    }
    std::uint64_t count = r.u64();
    if (count != prod)
        throw IoError("FTEN length mismatch (dims product " + std::to_string(prod) +
                      " vs declared " + std::to_string(count) + "): " + path.string());
    r.need(count * 4, "payload");

    Tensor t(dims);
    for (std::uint64_t i = 0; i < count; ++i)
        t.v[i] = f32_from_le(r.p + r.off + i * 4);
    return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::string out;
    out.reserve(32 + t.size() * 4);
    out += "FTEN";
    put_u16(out, kFtenVersion);
    out.push_back(static_cast<char>(kDtypeF32));
    out.push_back(static_cast<char>(t.shape.size()));
    for (std::uint32_t d : t.shape) put_u32(out, d);
    put_u64(out, t.size());
    for (float f : t.v) f32_to_le(f, out);
    atomic_write_file(path, out);
}

void atomic_write_file(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + tmp.string() + " -> " + path.string());
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<FixationSequence> read_fixation_csv(const std::filesystem::path& path,
                                                const std::string& video_id) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixation file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("driver_id,frame_index,x,y,duration_ms", 0) != 0)
        throw IoError("bad fixation CSV header: " + path.string());

    // Preserve first-appearance order of drivers.
    std::vector<FixationSequence> seqs;
    std::map<std::string, std::size_t> index;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string driver, field;
        FixationPoint p;
        if (!std::getline(ss, driver, ',')) goto malformed;
        if (!std::getline(ss, field, ',')) goto malformed;
        p.frame_index = std::stoi(field);
        if (!std::getline(ss, field, ',')) goto malformed;
        p.x = std::stoi(field);
        if (!std::getline(ss, field, ',')) goto malformed;
        p.y = std::stoi(field);
        if (!std::getline(ss, field, ',')) goto malformed;
        p.duration_ms = std::stod(field);

        {
            auto it = index.find(driver);
            if (it == index.end()) {
                index[driver] = seqs.size();
                seqs.push_back(FixationSequence{{}, driver, video_id});
                it = index.find(driver);
            }
            seqs[it->second].points.push_back(p);
        }
        continue;
    malformed:
        throw IoError("malformed fixation CSV row " + std::to_string(lineno) + ": " +
                      path.string());
    }
    for (const auto& s : seqs) {
        for (std::size_t i = 1; i < s.points.size(); ++i)
            if (s.points[i].frame_index < s.points[i - 1].frame_index)
                throw ValidationError("fixation frame_index decreasing for driver " + s.driver_id +
                                      ": " + path.string());
    }
    return seqs;
}

void write_fixation_csv(const std::filesystem::path& path,
                        const std::vector<FixationSequence>& sequences) {
    std::string out = "driver_id,frame_index,x,y,duration_ms\n";
    for (const auto& s : sequences)
        for (const auto& p : s.points)
            out += s.driver_id + "," + std::to_string(p.frame_index) + "," + std::to_string(p.x) +
                   "," + std::to_string(p.y) + "," + format_double(p.duration_ms) + "\n";
    atomic_write_file(path, out);
}

}  // namespace medirl
