#include "semcrc/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace semcrc::npy {
namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) os << ",";
        if (i + 1 < shape.size()) os << " ";
    }
    os << ")";
    return os.str();
}

void write_header(std::ofstream& f, const char* descr, const std::vector<std::size_t>& shape) {
    std::string dict = std::string("{'descr': '") + descr +
                       "', 'fortran_order': False, 'shape': " + shape_string(shape) + ", }";
    // pad so that the total header (magic + version + len + dict + '\n') is a multiple of 64
    std::size_t base = 6 + 2 + 2;
    std::size_t total = base + dict.size() + 1;
    std::size_t pad = (64 - total % 64) % 64;
    dict.append(pad, ' ');
    dict.push_back('\n');

    f.write(kMagic, 6);
    char version[2] = {1, 0};
    f.write(version, 2);
    std::uint16_t hlen = static_cast<std::uint16_t>(dict.size());
    char lenbuf[2] = {static_cast<char>(hlen & 0xff), static_cast<char>(hlen >> 8)};
    f.write(lenbuf, 2);
    f.write(dict.data(), static_cast<std::streamsize>(dict.size()));
}

std::string read_header(std::ifstream& f, const std::filesystem::path& path) {
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kMagic, 6) != 0)
        throw std::runtime_error("not an NPY file: " + path.string());
    char version[2];
    f.read(version, 2);
    if (version[0] != 1) throw std::runtime_error("unsupported NPY version in " + path.string());
    unsigned char lenbuf[2];
    f.read(reinterpret_cast<char*>(lenbuf), 2);
    std::uint16_t hlen = static_cast<std::uint16_t>(lenbuf[0] | (lenbuf[1] << 8));
    std::string dict(hlen, '\0');
    f.read(dict.data(), hlen);
    if (!f) throw std::runtime_error("truncated NPY header in " + path.string());
    return dict;
}

std::vector<std::size_t> parse_shape(const std::string& dict, const std::filesystem::path& path) {
    auto key = dict.find("'shape'");
    if (key == std::string::npos) throw std::runtime_error("NPY header missing shape: " + path.string());
    auto open = dict.find('(', key);
    auto close = dict.find(')', open);
    if (open == std::string::npos || close == std::string::npos)
        throw std::runtime_error("malformed NPY shape: " + path.string());
    std::vector<std::size_t> shape;
    std::string inner = dict.substr(open + 1, close - open - 1);
    std::istringstream is(inner);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        std::size_t pos = tok.find_first_not_of(" \t");
        if (pos == std::string::npos) continue;
        shape.push_back(static_cast<std::size_t>(std::stoull(tok.substr(pos))));
    }
    return shape;
}

void check_descr(const std::string& dict, const char* want, const std::filesystem::path& path) {
    if (dict.find(std::string("'descr': '") + want + "'") == std::string::npos)
        throw std::runtime_error(std::string("NPY dtype mismatch (want ") + want + ") in " + path.string());
    if (dict.find("'fortran_order': False") == std::string::npos)
        throw std::runtime_error("fortran-order NPY not supported: " + path.string());
}

template <typename T>
void save_impl(const std::filesystem::path& path, const char* descr,
               const std::vector<std::size_t>& shape, const std::vector<T>& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path.string());
    write_header(f, descr, shape);
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

template <typename T>
void load_impl(const std::filesystem::path& path, const char* descr,
               std::vector<std::size_t>& shape, std::vector<T>& data) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path.string());
    std::string dict = read_header(f, path);
    check_descr(dict, descr, path);
    shape = parse_shape(dict, path);
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    data.resize(n);
    f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!f) throw std::runtime_error("truncated NPY data in " + path.string());
}

}  // namespace

void save_f32(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<float>& data) {
    save_impl(path, "<f4", shape, data);
}
void save_u16(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint16_t>& data) {
    save_impl(path, "<u2", shape, data);
}
void load_f32(const std::filesystem::path& path, std::vector<std::size_t>& shape,
              std::vector<float>& data) {
    load_impl(path, "<f4", shape, data);
}
void load_u16(const std::filesystem::path& path, std::vector<std::size_t>& shape,
              std::vector<std::uint16_t>& data) {
    load_impl(path, "<u2", shape, data);
}

}  // namespace semcrc::npy
