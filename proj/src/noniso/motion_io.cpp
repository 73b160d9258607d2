#include "noniso/motion_io.hpp"

#include "noniso/mat.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace noniso {

namespace {

constexpr char kMotionMagic[4] = {'N', 'I', 'M', 'O'};
constexpr char kPredMagic[4] = {'N', 'I', 'P', 'R'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.good(), "motion io: truncated stream");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
}

float read_f32(std::istream& in) {
    const std::uint32_t bits = read_u32(in);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void write_motion(std::ostream& out, const Motion& m) {
    out.write(kMotionMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(m.frames));
    write_u32(out, static_cast<std::uint32_t>(m.joints));
    write_u32(out, 3);
    write_f32(out, static_cast<float>(m.frame_rate));
    for (double v : m.a) write_f32(out, static_cast<float>(v));
}

Motion read_motion(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, kMotionMagic, 4) == 0, "motion io: bad NIMO magic");
    require(read_u32(in) == kVersion, "motion io: unsupported NIMO version");
    const std::uint32_t frames = read_u32(in);
    const std::uint32_t joints = read_u32(in);
    const std::uint32_t dims = read_u32(in);
    require(dims == 3, "motion io: coordinate dimension must be 3");
    require(frames > 0 && joints > 0 && frames < (1u << 24) && joints < (1u << 16),
            "motion io: implausible header");
    const float rate = read_f32(in);
    Motion m(static_cast<int>(frames), static_cast<int>(joints), rate);
    for (double& v : m.a) v = read_f32(in);
    return m;
}

void save_motion(const std::string& path, const Motion& m) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "motion io: cannot write " + path);
    write_motion(out, m);
    require(out.good(), "motion io: write failure on " + path);
}

Motion load_motion(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "motion io: cannot open " + path);
    Motion m = read_motion(in);
    in.peek();
    require(in.eof(), "motion io: trailing bytes in " + path);
    return m;
}

void save_prediction_set(const std::string& path, const PredictionSet& preds) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "motion io: cannot write " + path);
    out.write(kPredMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(preds.size()));
    for (const Motion& m : preds) write_motion(out, m);
    require(out.good(), "motion io: write failure on " + path);
}

PredictionSet load_prediction_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "motion io: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, kPredMagic, 4) == 0,
            "motion io: bad NIPR magic in " + path);
    const std::uint32_t n = read_u32(in);
    require(n < (1u << 24), "motion io: implausible prediction count");
    PredictionSet preds;
    preds.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) preds.push_back(read_motion(in));
    in.peek();
    require(in.eof(), "motion io: trailing bytes in " + path);
    return preds;
}

void write_motion_csv(std::ostream& out, const Motion& m) {
    out << "frame,joint,x,y,z\n";
    out.precision(17);
    for (int f = 0; f < m.frames; ++f)
        for (int j = 0; j < m.joints; ++j)
            out << f << "," << j << "," << m.at(f, j, 0) << "," << m.at(f, j, 1) << ","
                << m.at(f, j, 2) << "\n";
}

Motion read_motion_csv(std::istream& in, double frame_rate) {
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "motion csv: empty input");
    std::map<std::pair<int, int>, std::array<double, 3>> cells;
    int max_f = -1, max_j = -1;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        int f, j;
        double x, y, z;
        char comma;
        ss >> f >> comma >> j >> comma >> x >> comma >> y >> comma >> z;
        require(!ss.fail(), "motion csv: parse error at line " + std::to_string(lineno));
        cells[{f, j}] = {x, y, z};
        max_f = std::max(max_f, f);
        max_j = std::max(max_j, j);
    }
    require(max_f >= 0 && max_j >= 0, "motion csv: no data rows");
    Motion m(max_f + 1, max_j + 1, frame_rate);
    require(cells.size() == static_cast<size_t>(m.frames) * m.joints,
            "motion csv: missing (frame, joint) rows");
    for (const auto& [key, val] : cells)
        for (int d = 0; d < 3; ++d) m.at(key.first, key.second, d) = val[d];
    return m;
}

} // namespace noniso
