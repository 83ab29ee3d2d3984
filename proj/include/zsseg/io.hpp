#pragma once

// Array container: an 8-byte little-endian header length, a JSON header
// mapping each array name to {dtype, shape, data_offsets} plus an optional
// "__metadata__" object of string pairs, then the raw little-endian payload.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace zsseg {

static_assert(std::endian::native == std::endian::little, "container IO assumes a little-endian host");

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DType { f64, u8 };

inline const char* dtype_name(DType d) { return d == DType::f64 ? "F64" : "U8"; }
inline std::size_t dtype_size(DType d) { return d == DType::f64 ? 8 : 1; }
inline DType parse_dtype(const std::string& s) {
    if (s == "F64") return DType::f64;
    if (s == "U8") return DType::u8;
    throw FormatError("unsupported dtype '" + s + "'");
}

struct NamedArray {
    std::string name;
    DType dtype = DType::f64;
    std::vector<std::int64_t> shape;
    std::vector<std::uint8_t> bytes;

    [[nodiscard]] std::size_t count() const {
        std::size_t n = 1;
        for (auto d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    static NamedArray from_f64(std::string name, std::vector<std::int64_t> shape, const std::vector<double>& v) {
        NamedArray a{std::move(name), DType::f64, std::move(shape), {}};
        if (a.count() != v.size()) throw FormatError("array '" + a.name + "': shape does not match data");
        a.bytes.resize(v.size() * 8);
        if (!v.empty()) std::memcpy(a.bytes.data(), v.data(), a.bytes.size());
        return a;
    }

    static NamedArray from_u8(std::string name, std::vector<std::int64_t> shape, std::vector<std::uint8_t> v) {
        NamedArray a{std::move(name), DType::u8, std::move(shape), std::move(v)};
        if (a.count() != a.bytes.size()) throw FormatError("array '" + a.name + "': shape does not match data");
        return a;
    }

    [[nodiscard]] std::vector<double> as_f64() const {
        if (dtype != DType::f64) throw FormatError("array '" + name + "' is not F64");
        std::vector<double> v(count());
        if (!v.empty()) std::memcpy(v.data(), bytes.data(), v.size() * 8);
        return v;
    }

    [[nodiscard]] const std::vector<std::uint8_t>& as_u8() const {
        if (dtype != DType::u8) throw FormatError("array '" + name + "' is not U8");
        return bytes;
    }
};

struct Container {
    std::vector<NamedArray> arrays;
    std::map<std::string, std::string> metadata;

    [[nodiscard]] const NamedArray& get(const std::string& name) const {
        for (const auto& a : arrays)
            if (a.name == name) return a;
        throw FormatError("missing array '" + name + "'");
    }
    [[nodiscard]] bool has(const std::string& name) const {
        for (const auto& a : arrays)
            if (a.name == name) return true;
        return false;
    }
    [[nodiscard]] const std::string& meta(const std::string& key) const {
        auto it = metadata.find(key);
        if (it == metadata.end()) throw FormatError("missing metadata '" + key + "'");
        return it->second;
    }
};

inline std::vector<std::uint8_t> encode_container(const Container& c) {
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    if (!c.metadata.empty()) {
        nlohmann::ordered_json meta = nlohmann::ordered_json::object();
        for (const auto& [k, v] : c.metadata) meta[k] = v;
        header["__metadata__"] = meta;
    }
    std::size_t offset = 0;
    for (const auto& a : c.arrays) {
        if (a.name == "__metadata__") throw FormatError("reserved array name");
        if (a.bytes.size() != a.count() * dtype_size(a.dtype))
            throw FormatError("array '" + a.name + "': byte size does not match shape");
        header[a.name] = {{"dtype", dtype_name(a.dtype)},
                          {"shape", a.shape},
                          {"data_offsets", {offset, offset + a.bytes.size()}}};
        offset += a.bytes.size();
    }
    std::string text = header.dump();
    while (text.size() % 8 != 0) text.push_back(' ');
    std::vector<std::uint8_t> out(8 + text.size() + offset);
    const std::uint64_t n = text.size();
    std::memcpy(out.data(), &n, 8);
    std::memcpy(out.data() + 8, text.data(), text.size());
    std::size_t pos = 8 + text.size();
    for (const auto& a : c.arrays) {
        if (!a.bytes.empty()) std::memcpy(out.data() + pos, a.bytes.data(), a.bytes.size());
        pos += a.bytes.size();
    }
    return out;
}

inline Container decode_container(const std::vector<std::uint8_t>& buf) {
    if (buf.size() < 8) throw FormatError("container truncated");
    std::uint64_t n = 0;
    std::memcpy(&n, buf.data(), 8);
    if (n > buf.size() - 8) throw FormatError("container header length exceeds file size");
    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(buf.begin() + 8, buf.begin() + 8 + static_cast<std::ptrdiff_t>(n));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("container header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) throw FormatError("container header must be an object");
    const std::size_t base = 8 + n;
    const std::size_t payload = buf.size() - base;
    Container c;
    for (auto it = header.begin(); it != header.end(); ++it) {
        if (it.key() == "__metadata__") {
            for (auto m = it->begin(); m != it->end(); ++m) c.metadata[m.key()] = m->get<std::string>();
            continue;
        }
        try {
            NamedArray a;
            a.name = it.key();
            a.dtype = parse_dtype(it->at("dtype").get<std::string>());
            a.shape = it->at("shape").get<std::vector<std::int64_t>>();
            const auto off = it->at("data_offsets").get<std::vector<std::size_t>>();
            if (off.size() != 2 || off[0] > off[1] || off[1] > payload)
                throw FormatError("array '" + a.name + "': bad data_offsets");
            for (auto d : a.shape)
                if (d < 0) throw FormatError("array '" + a.name + "': negative extent");
            if (off[1] - off[0] != a.count() * dtype_size(a.dtype))
                throw FormatError("array '" + a.name + "': byte range does not match shape");
            a.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(base + off[0]),
                           buf.begin() + static_cast<std::ptrdiff_t>(base + off[1]));
            c.arrays.push_back(std::move(a));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("array '" + it.key() + "': " + e.what());
        }
    }
    return c;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
    const auto b = read_file_bytes(path);
    return {b.begin(), b.end()};
}

inline void save_container(const std::string& path, const Container& c) {
    write_file_bytes(path, encode_container(c));
}

inline Container load_container(const std::string& path) {
    try {
        return decode_container(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what());
    }
}

}  // namespace zsseg
