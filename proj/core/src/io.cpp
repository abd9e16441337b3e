// Copyright Contributors to the solidsplat Project
// SPDX-License-Identifier: Apache-2.0
#include "solidsplat/io.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "solidsplat I/O assumes a little-endian host");

namespace solidsplat {

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path &path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// PLY

namespace {

struct ElementProperty {
    std::string name;
    PlyType type = PlyType::float32;
    bool is_list = false;
    PlyType count_type = PlyType::uint8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<ElementProperty> properties;
};

struct PlyData {
    PlyFormat format = PlyFormat::ascii;
    std::vector<PlyProperty> vertex_properties;
    std::vector<std::vector<double>> vertices;
    std::size_t data_offset = 0;
    std::vector<std::size_t> vertex_offsets;
};

std::optional<PlyType> parse_type(std::string_view s) {
    if (s == "char" || s == "int8") return PlyType::int8;
    if (s == "uchar" || s == "uint8") return PlyType::uint8;
    if (s == "short" || s == "int16") return PlyType::int16;
    if (s == "ushort" || s == "uint16") return PlyType::uint16;
    if (s == "int" || s == "int32") return PlyType::int32;
    if (s == "uint" || s == "uint32") return PlyType::uint32;
    if (s == "float" || s == "float32") return PlyType::float32;
    if (s == "double" || s == "float64") return PlyType::float64;
    return std::nullopt;
}

const char *type_name(PlyType t) {
    switch (t) {
    case PlyType::int8: return "char";
    case PlyType::uint8: return "uchar";
    case PlyType::int16: return "short";
    case PlyType::uint16: return "ushort";
    case PlyType::int32: return "int";
    case PlyType::uint32: return "uint";
    case PlyType::float32: return "float";
    case PlyType::float64: return "double";
    }
    return "float";
}

std::size_t type_size(PlyType t) {
    switch (t) {
    case PlyType::int8:
    case PlyType::uint8: return 1;
    case PlyType::int16:
    case PlyType::uint16: return 2;
    case PlyType::int32:
    case PlyType::uint32:
    case PlyType::float32: return 4;
    case PlyType::float64: return 8;
    }
    return 4;
}

bool is_integer(PlyType t) { return t != PlyType::float32 && t != PlyType::float64; }

template <class T>
T load_le(const char *p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double read_binary(PlyType t, const char *p) {
    switch (t) {
    case PlyType::int8: return load_le<std::int8_t>(p);
    case PlyType::uint8: return load_le<std::uint8_t>(p);
    case PlyType::int16: return load_le<std::int16_t>(p);
    case PlyType::uint16: return load_le<std::uint16_t>(p);
    case PlyType::int32: return load_le<std::int32_t>(p);
    case PlyType::uint32: return load_le<std::uint32_t>(p);
    case PlyType::float32: return load_le<float>(p);
    case PlyType::float64: return load_le<double>(p);
    }
    return 0.0;
}

template <class T>
void store_le(std::string &out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

void write_binary(std::string &out, PlyType t, double v) {
    switch (t) {
    case PlyType::int8: store_le(out, static_cast<std::int8_t>(v)); break;
    case PlyType::uint8: store_le(out, static_cast<std::uint8_t>(v)); break;
    case PlyType::int16: store_le(out, static_cast<std::int16_t>(v)); break;
    case PlyType::uint16: store_le(out, static_cast<std::uint16_t>(v)); break;
    case PlyType::int32: store_le(out, static_cast<std::int32_t>(v)); break;
    case PlyType::uint32: store_le(out, static_cast<std::uint32_t>(v)); break;
    case PlyType::float32: store_le(out, static_cast<float>(v)); break;
    case PlyType::float64: store_le(out, v); break;
    }
}

void write_ascii(std::string &out, PlyType t, double v) {
    char buf[64];
    std::to_chars_result r;
    if (t == PlyType::float32) {
        r = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(v));
    } else if (t == PlyType::float64) {
        r = std::to_chars(buf, buf + sizeof(buf), v);
    } else {
        r = std::to_chars(buf, buf + sizeof(buf), static_cast<long long>(v));
    }
    out.append(buf, r.ptr);
}

// Value ranges of the integer types, for ASCII validation.
bool fits(PlyType t, double v) {
    if (!is_integer(t)) return true;
    if (v != std::floor(v)) return false;
    switch (t) {
    case PlyType::int8: return v >= -128 && v <= 127;
    case PlyType::uint8: return v >= 0 && v <= 255;
    case PlyType::int16: return v >= -32768 && v <= 32767;
    case PlyType::uint16: return v >= 0 && v <= 65535;
    case PlyType::int32: return v >= -2147483648.0 && v <= 2147483647.0;
    case PlyType::uint32: return v >= 0 && v <= 4294967295.0;
    default: return true;
    }
}

class AsciiReader {
public:
    AsciiReader(std::string_view bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    double next(PlyType t) {
        skip_space();
        if (pos_ >= bytes_.size()) throw ParseError("truncated ASCII payload", pos_);
        const std::size_t start = pos_;
        while (pos_ < bytes_.size() && !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
        double v = 0.0;
        const char *first = bytes_.data() + start;
        const char *last = bytes_.data() + pos_;
        const auto r = std::from_chars(first, last, v);
        if (r.ec != std::errc() || r.ptr != last) {
            // from_chars rejects "inf"/"nan" spellings that some writers emit.
            const std::string tok(first, last);
            if (tok == "inf" || tok == "+inf") v = std::numeric_limits<double>::infinity();
            else if (tok == "-inf") v = -std::numeric_limits<double>::infinity();
            else if (tok == "nan" || tok == "-nan") v = std::numeric_limits<double>::quiet_NaN();
            else throw ParseError("malformed number '" + tok + "'", start);
        }
        if (t == PlyType::float32) v = static_cast<float>(v);
        if (!fits(t, v)) throw ParseError(std::string("value out of range for type ") + type_name(t), start);
        return v;
    }

    std::size_t offset() {
        skip_space();
        return pos_;
    }

    bool at_end() {
        skip_space();
        return pos_ >= bytes_.size();
    }

private:
    void skip_space() {
        while (pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    }

    std::string_view bytes_;
    std::size_t pos_;
};

PlyData parse_ply_data(std::string_view bytes) {
    std::size_t pos = 0;
    auto next_line = [&](std::size_t &line_start) -> std::string_view {
        line_start = pos;
        const std::size_t nl = bytes.find('\n', pos);
        if (nl == std::string_view::npos) throw ParseError("unterminated PLY header", pos);
        std::string_view line = bytes.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = nl + 1;
        return line;
    };
    auto split = [](std::string_view line) {
        std::vector<std::string_view> words;
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
            const std::size_t s = i;
            while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
            if (i > s) words.push_back(line.substr(s, i - s));
        }
        return words;
    };

    std::size_t line_start = 0;
    if (next_line(line_start) != "ply") throw ParseError("missing 'ply' magic", 0);

    PlyData data;
    bool have_format = false;
    std::vector<Element> elements;
    for (;;) {
        const auto line = next_line(line_start);
        const auto words = split(line);
        if (words.empty()) continue;
        const auto &key = words[0];
        if (key == "end_header") break;
        if (key == "comment" || key == "obj_info") continue;
        if (key == "format") {
            if (words.size() != 3) throw ParseError("malformed format line", line_start);
            if (words[1] == "ascii") data.format = PlyFormat::ascii;
            else if (words[1] == "binary_little_endian") data.format = PlyFormat::binary_little_endian;
            else throw ParseError("unsupported PLY format '" + std::string(words[1]) + "'", line_start);
            have_format = true;
        } else if (key == "element") {
            if (words.size() != 3) throw ParseError("malformed element line", line_start);
            Element e;
            e.name = words[1];
            const auto r = std::from_chars(words[2].data(), words[2].data() + words[2].size(), e.count);
            if (r.ec != std::errc() || r.ptr != words[2].data() + words[2].size()) {
                throw ParseError("malformed element count", line_start);
            }
            elements.push_back(std::move(e));
        } else if (key == "property") {
            if (elements.empty()) throw ParseError("property before any element", line_start);
            ElementProperty p;
            if (words.size() == 5 && words[1] == "list") {
                const auto ct = parse_type(words[2]);
                const auto vt = parse_type(words[3]);
                if (!ct || !vt || !is_integer(*ct)) throw ParseError("malformed list property", line_start);
                p.is_list = true;
                p.count_type = *ct;
                p.type = *vt;
                p.name = words[4];
            } else if (words.size() == 3) {
                const auto t = parse_type(words[1]);
                if (!t) throw ParseError("unknown property type '" + std::string(words[1]) + "'", line_start);
                p.type = *t;
                p.name = words[2];
            } else {
                throw ParseError("malformed property line", line_start);
            }
            for (const auto &q : elements.back().properties) {
                if (q.name == p.name) throw ParseError("duplicate property '" + p.name + "'", line_start);
            }
            elements.back().properties.push_back(std::move(p));
        } else {
            throw ParseError("unknown header keyword '" + std::string(key) + "'", line_start);
        }
    }
    if (!have_format) throw ParseError("missing format line", pos);
    data.data_offset = pos;

    const Element *vertex = nullptr;
    for (const auto &e : elements) {
        if (e.name == "vertex") {
            if (vertex) throw ParseError("duplicate vertex element", data.data_offset);
            vertex = &e;
        }
    }
    if (!vertex) throw ParseError("no vertex element", data.data_offset);
    for (const auto &p : vertex->properties) {
        if (p.is_list) throw ParseError("list property '" + p.name + "' in vertex element", data.data_offset);
        data.vertex_properties.push_back({p.name, p.type});
    }
    // Guards reserve() against absurd counts in a corrupt header.
    std::size_t min_record = 0;
    for (const auto &p : vertex->properties) min_record += data.format == PlyFormat::ascii ? 2 : type_size(p.type);
    if (min_record > 0 && vertex->count > (bytes.size() - pos) / min_record + 1) {
        throw ParseError("vertex count exceeds payload size", data.data_offset);
    }
    data.vertices.reserve(vertex->count);
    data.vertex_offsets.reserve(vertex->count);

    if (data.format == PlyFormat::ascii) {
        AsciiReader reader(bytes, pos);
        for (const auto &e : elements) {
            for (std::size_t i = 0; i < e.count; ++i) {
                std::vector<double> row;
                const std::size_t start = reader.offset();
                for (const auto &p : e.properties) {
                    if (p.is_list) {
                        const double n = reader.next(p.count_type);
                        if (n < 0) throw ParseError("negative list length", start);
                        for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) reader.next(p.type);
                    } else {
                        row.push_back(reader.next(p.type));
                    }
                }
                if (&e == vertex) {
                    data.vertices.push_back(std::move(row));
                    data.vertex_offsets.push_back(start);
                }
            }
        }
        if (!reader.at_end()) throw ParseError("trailing data after last element", reader.offset());
    } else {
        auto need = [&](std::size_t n) {
            if (bytes.size() - pos < n) throw ParseError("truncated binary payload", pos);
        };
        for (const auto &e : elements) {
            for (std::size_t i = 0; i < e.count; ++i) {
                std::vector<double> row;
                const std::size_t start = pos;
                for (const auto &p : e.properties) {
                    if (p.is_list) {
                        need(type_size(p.count_type));
                        const double n = read_binary(p.count_type, bytes.data() + pos);
                        pos += type_size(p.count_type);
                        if (n < 0) throw ParseError("negative list length", start);
                        const std::size_t len = static_cast<std::size_t>(n) * type_size(p.type);
                        need(len);
                        pos += len;
                    } else {
                        need(type_size(p.type));
                        row.push_back(read_binary(p.type, bytes.data() + pos));
                        pos += type_size(p.type);
                    }
                }
                if (&e == vertex) {
                    data.vertices.push_back(std::move(row));
                    data.vertex_offsets.push_back(start);
                }
            }
        }
        if (pos != bytes.size()) throw ParseError("trailing data after last element", pos);
    }
    return data;
}

std::size_t require_property(const PlyData &data, std::string_view name) {
    for (std::size_t i = 0; i < data.vertex_properties.size(); ++i) {
        if (data.vertex_properties[i].name == name) return i;
    }
    throw ParseError("missing required vertex property '" + std::string(name) + "'", data.data_offset);
}

std::string ply_header(PlyFormat format, std::size_t count, std::span<const PlyProperty> props) {
    std::string h = "ply\nformat ";
    h += format == PlyFormat::ascii ? "ascii" : "binary_little_endian";
    h += " 1.0\nelement vertex " + std::to_string(count) + "\n";
    for (const auto &p : props) h += std::string("property ") + type_name(p.type) + " " + p.name + "\n";
    h += "end_header\n";
    return h;
}

std::string serialize_records(PlyFormat format, std::span<const PlyProperty> props,
                              const std::vector<std::vector<double>> &records) {
    std::string out = ply_header(format, records.size(), props);
    for (const auto &row : records) {
        if (row.size() != props.size()) throw ValidationError("PLY record width differs from property count");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (format == PlyFormat::ascii) {
                if (i) out += ' ';
                write_ascii(out, props[i].type, row[i]);
            } else {
                write_binary(out, props[i].type, row[i]);
            }
        }
        if (format == PlyFormat::ascii) out += '\n';
    }
    return out;
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }


} // namespace

SceneFile parse_ply(std::string_view bytes) {
    PlyData data = parse_ply_data(bytes);
    const std::size_t ix = require_property(data, "x"), iy = require_property(data, "y"),
                      iz = require_property(data, "z");
    std::size_t is[3], ir[4], ic[3];
    for (int k = 0; k < 3; ++k) is[k] = require_property(data, "scale_" + std::to_string(k));
    for (int k = 0; k < 4; ++k) ir[k] = require_property(data, "rot_" + std::to_string(k));
    for (int k = 0; k < 3; ++k) ic[k] = require_property(data, "f_dc_" + std::to_string(k));
    const std::size_t io = require_property(data, "opacity");

    SceneFile file;
    file.format = data.format;
    file.properties = data.vertex_properties;
    file.gaussians.reserve(data.vertices.size());
    for (std::size_t v = 0; v < data.vertices.size(); ++v) {
        const auto &row = data.vertices[v];
        const std::size_t offset = data.vertex_offsets[v];
        for (double x : row) {
            if (!std::isfinite(x)) throw ParseError("non-finite value in vertex " + std::to_string(v), offset);
        }
        const Vec3 center(row[ix], row[iy], row[iz]);
        const Vec3 scales(std::exp(row[is[0]]), std::exp(row[is[1]]), std::exp(row[is[2]]));
        const Vec4 q(row[ir[0]], row[ir[1]], row[ir[2]], row[ir[3]]);
        if (!(q.norm() > 0.0)) throw ParseError("zero quaternion in vertex " + std::to_string(v), offset);
        if (!(scales.minCoeff() > 0.0) || !scales.allFinite()) {
            throw ParseError("scale out of range in vertex " + std::to_string(v), offset);
        }
        const double opacity =
            std::clamp(sigmoid(row[io]), std::numeric_limits<double>::min(), kMaxOpacity);
        Vec3 color;
        for (int k = 0; k < 3; ++k) color[k] = std::clamp(0.5 + kShC0 * row[ic[k]], 0.0, 1.0);
        try {
            file.gaussians.push_back(make_gaussian(center, scales, q, opacity, color));
        } catch (const ValidationError &e) {
            throw ParseError(std::string("invalid vertex ") + std::to_string(v) + ": " + e.what(), offset);
        }
    }
    file.records = std::move(data.vertices);
    return file;
}

SceneFile load_ply(const std::filesystem::path &path) { return parse_ply(read_file(path)); }

SceneFile encode_scene(const Scene &scene) {
    std::vector<PlyProperty> props;
    for (const char *name : {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                             "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
        props.push_back({name, PlyType::float32});
    }
    std::vector<std::vector<double>> records;
    records.reserve(scene.size());
    for (const auto &g : scene) {
        std::vector<double> row;
        row.reserve(props.size());
        for (int k = 0; k < 3; ++k) row.push_back(g.center[k]);
        for (int k = 0; k < 3; ++k) row.push_back((g.color[k] - 0.5) / kShC0);
        row.push_back(std::log(g.opacity / (1.0 - g.opacity)));
        for (int k = 0; k < 3; ++k) row.push_back(std::log(g.scales[k]));
        for (int k = 0; k < 4; ++k) row.push_back(g.rotation[k]);
        for (auto &x : row) x = static_cast<float>(x);
        records.push_back(std::move(row));
    }
    // Decoding the rounded records keeps `gaussians` consistent with what a reader sees.
    SceneFile file = parse_ply(serialize_records(PlyFormat::binary_little_endian, props, records));
    return file;
}

std::string serialize_ply(const SceneFile &file) {
    return serialize_records(file.format, file.properties, file.records);
}

void save_ply(const std::filesystem::path &path, const SceneFile &file) {
    write_file(path, serialize_ply(file));
}

std::vector<Vec3> parse_cloud(std::string_view bytes) {
    const PlyData data = parse_ply_data(bytes);
    const std::size_t ix = require_property(data, "x"), iy = require_property(data, "y"),
                      iz = require_property(data, "z");
    std::vector<Vec3> points;
    points.reserve(data.vertices.size());
    for (std::size_t v = 0; v < data.vertices.size(); ++v) {
        const auto &row = data.vertices[v];
        const Vec3 p(row[ix], row[iy], row[iz]);
        if (!p.allFinite()) throw ParseError("non-finite point " + std::to_string(v), data.vertex_offsets[v]);
        points.push_back(p);
    }
    return points;
}

std::vector<Vec3> load_cloud(const std::filesystem::path &path) { return parse_cloud(read_file(path)); }

std::string serialize_cloud(std::span<const Vec3> points, PlyFormat format) {
    const PlyProperty props[] = {{"x", PlyType::float32}, {"y", PlyType::float32}, {"z", PlyType::float32}};
    std::vector<std::vector<double>> records;
    records.reserve(points.size());
    for (const auto &p : points) records.push_back({p.x(), p.y(), p.z()});
    return serialize_records(format, props, records);
}

void save_cloud(const std::filesystem::path &path, std::span<const Vec3> points, PlyFormat format) {
    write_file(path, serialize_cloud(points, format));
}

// ---------------------------------------------------------------------------
// Cameras

namespace {

using nlohmann::json;

double number_field(const json &obj, const std::string &path, const char *key) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(path + "." + key + ": missing");
    if (!it->is_number()) throw ValidationError(path + "." + key + ": expected a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw ValidationError(path + "." + key + ": not finite");
    return v;
}

int size_field(const json &obj, const std::string &path, const char *key) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(path + "." + key + ": missing");
    if (!it->is_number_integer()) throw ValidationError(path + "." + key + ": expected an integer");
    const auto v = it->get<long long>();
    if (v <= 0 || v > 1 << 20) throw ValidationError(path + "." + key + ": must be a positive pixel count");
    return static_cast<int>(v);
}

std::vector<double> array_field(const json &obj, const std::string &path, const char *key,
                                std::size_t n) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(path + "." + key + ": missing");
    if (!it->is_array() || it->size() != n) {
        throw ValidationError(path + "." + key + ": expected an array of " + std::to_string(n) + " numbers");
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        const auto &e = (*it)[i];
        const std::string p = path + "." + key + "[" + std::to_string(i) + "]";
        if (!e.is_number()) throw ValidationError(p + ": expected a number");
        out.push_back(e.get<double>());
        if (!std::isfinite(out.back())) throw ValidationError(p + ": not finite");
    }
    return out;
}

} // namespace

std::vector<Camera> parse_cameras(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw ParseError(std::string("camera JSON: ") + e.what(), e.byte);
    }
    if (!doc.is_array()) throw ValidationError("cameras: expected a top-level array");
    std::vector<Camera> cams;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string path = "cameras[" + std::to_string(i) + "]";
        const json &c = doc[i];
        if (!c.is_object()) throw ValidationError(path + ": expected an object");
        const int w = size_field(c, path, "width");
        const int h = size_field(c, path, "height");
        const double fx = number_field(c, path, "fx");
        const double fy = number_field(c, path, "fy");
        if (!(fx > 0)) throw ValidationError(path + ".fx: must be positive");
        if (!(fy > 0)) throw ValidationError(path + ".fy: must be positive");
        const double cx = number_field(c, path, "cx");
        const double cy = number_field(c, path, "cy");
        const auto r = array_field(c, path, "rotation", 9);
        const auto t = array_field(c, path, "translation", 3);
        Mat3 rot;
        for (int k = 0; k < 9; ++k) rot(k / 3, k % 3) = r[k];
        try {
            cams.push_back(make_camera(fx, fy, cx, cy, rot, Vec3(t[0], t[1], t[2]), w, h));
        } catch (const ValidationError &e) {
            throw ValidationError(path + ": " + e.what());
        }
    }
    return cams;
}

std::vector<Camera> load_cameras(const std::filesystem::path &path) {
    return parse_cameras(read_file(path));
}

std::string serialize_cameras(std::span<const Camera> cameras) {
    json doc = json::array();
    for (const auto &c : cameras) {
        json r = json::array();
        for (int k = 0; k < 9; ++k) r.push_back(c.rotation(k / 3, k % 3));
        doc.push_back({{"width", c.width},
                       {"height", c.height},
                       {"fx", c.fx()},
                       {"fy", c.fy()},
                       {"cx", c.cx()},
                       {"cy", c.cy()},
                       {"rotation", r},
                       {"translation", {c.translation.x(), c.translation.y(), c.translation.z()}}});
    }
    return doc.dump(2) + "\n";
}

void save_cameras(const std::filesystem::path &path, std::span<const Camera> cameras) {
    write_file(path, serialize_cameras(cameras));
}

// ---------------------------------------------------------------------------
// Depth maps

std::string encode_pfm(const DepthMap &depth) {
    const int w = depth.depth.width();
    const int h = depth.depth.height();
    if (depth.mask.width() != w || depth.mask.height() != h) {
        throw ValidationError("depth and mask dimensions differ");
    }
    std::string out = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
    out.reserve(out.size() + 4 * depth.depth.size());
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            const float v = depth.mask(x, y) ? static_cast<float>(depth.depth(x, y))
                                             : std::numeric_limits<float>::infinity();
            store_le(out, v);
        }
    }
    return out;
}

void write_depth_pfm(const std::filesystem::path &path, const DepthMap &depth) {
    write_file(path, encode_pfm(depth));
}

DepthMap decode_pfm(std::string_view bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        const std::size_t s = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        if (s == pos) throw ParseError("truncated PFM header", s);
        return std::make_pair(bytes.substr(s, pos - s), s);
    };
    const auto [magic, m_off] = token();
    if (magic != "Pf") throw ParseError("expected single-channel 'Pf' magic", m_off);
    int dims[2];
    for (int &d : dims) {
        const auto [tok, off] = token();
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), d);
        if (r.ec != std::errc() || r.ptr != tok.data() + tok.size() || d <= 0) {
            throw ParseError("malformed PFM dimension", off);
        }
    }
    const auto [scale_tok, s_off] = token();
    double scale = 0.0;
    const auto r = std::from_chars(scale_tok.data(), scale_tok.data() + scale_tok.size(), scale);
    if (r.ec != std::errc() || scale == 0.0) throw ParseError("malformed PFM scale", s_off);
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw ParseError("missing PFM header terminator", pos);
    }
    ++pos;
    const int w = dims[0], h = dims[1];
    const std::size_t payload = 4ull * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (bytes.size() - pos != payload) throw ParseError("PFM payload size mismatch", pos);
    DepthMap out{Image<double>(w, h, 0.0), Mask(w, h, 0)};
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            std::uint32_t bits = load_le<std::uint32_t>(bytes.data() + pos);
            if (scale > 0) bits = __builtin_bswap32(bits);
            float v;
            std::memcpy(&v, &bits, 4);
            pos += 4;
            out.depth(x, y) = v;
            out.mask(x, y) = std::isfinite(v) ? 1 : 0;
        }
    }
    return out;
}

DepthMap read_depth_pfm(const std::filesystem::path &path) { return decode_pfm(read_file(path)); }

namespace {

void write_png(const std::filesystem::path &path, int w, int h, png_uint_32 format, const void *buffer) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = format;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer, 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw ValidationError("writing PNG '" + path.string() + "': " + msg);
    }
}

} // namespace

void write_depth_png(const std::filesystem::path &path, const DepthMap &depth) {
    const int w = depth.depth.width();
    const int h = depth.depth.height();
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < depth.depth.size(); ++i) {
        if (!depth.mask[i]) continue;
        lo = std::min(lo, depth.depth[i]);
        hi = std::max(hi, depth.depth[i]);
    }
    std::vector<std::uint16_t> px(depth.depth.size(), 0);
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (!depth.mask[i]) continue;
        const double u = hi > lo ? (depth.depth[i] - lo) / (hi - lo) : 1.0;
        px[i] = static_cast<std::uint16_t>(std::lround(1.0 + u * 65534.0));
    }
    write_png(path, w, h, PNG_FORMAT_LINEAR_Y, px.data());
}

void write_scalar_png(const std::filesystem::path &path, const Image<double> &values,
                      const Mask &mask, double scale) {
    if (!(scale > 0.0)) throw ValidationError("visualization scale must be positive");
    std::vector<std::uint8_t> px(values.size(), 0);
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (!mask[i]) continue;
        px[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(values[i] / scale, 0.0, 1.0)));
    }
    write_png(path, values.width(), values.height(), PNG_FORMAT_GRAY, px.data());
}

void write_rgb_png(const std::filesystem::path &path, const RgbImage &image) {
    std::vector<std::uint8_t> px(3 * image.size());
    for (std::size_t i = 0; i < image.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            px[3 * i + c] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(image[i][c], 0.0, 1.0)));
        }
    }
    write_png(path, image.width(), image.height(), PNG_FORMAT_RGB, px.data());
}

RgbImage read_rgb_png(const std::filesystem::path &path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw ValidationError("reading PNG '" + path.string() + "': " + image.message);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw ValidationError("reading PNG '" + path.string() + "': " + msg);
    }
    RgbImage out(static_cast<int>(image.width), static_cast<int>(image.height));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = Vec3(px[3 * i], px[3 * i + 1], px[3 * i + 2]) / 255.0;
    }
    return out;
}

} // namespace solidsplat
