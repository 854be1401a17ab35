#include "oetr/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "oetr/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "tensor container IO assumes a little-endian host");

namespace oetr::io {
namespace {

constexpr char kMagic[4] = {'O', 'E', 'T', 'R'};

template <typename V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw IoError("tensor container truncated");
    return v;
}

template <typename T>
void write_impl(std::ostream& os, const Tensor<T>& t, Dtype code) {
    os.write(kMagic, 4);
    put<std::uint16_t>(os, kTensorFormatVersion);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(code));
    if (t.rank() > 255) throw InvalidShape("tensor rank exceeds container limit");
    put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape) put<std::uint64_t>(os, e);
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(T)));
    if (!os) throw IoError("failed writing tensor container");
}

struct Header {
    Dtype dtype;
    std::vector<std::size_t> shape;
};

Header read_header(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a tensor container (bad magic)");
    const auto version = get<std::uint16_t>(is);
    if (version != kTensorFormatVersion)
        throw IoError("unsupported tensor container version " + std::to_string(version));
    const auto dtype = get<std::uint8_t>(is);
    if (dtype > 1) throw IoError("unknown tensor dtype code " + std::to_string(dtype));
    const auto rank = get<std::uint8_t>(is);
    Header h;
    h.dtype = static_cast<Dtype>(dtype);
    h.shape.resize(rank);
    for (auto& e : h.shape) e = static_cast<std::size_t>(get<std::uint64_t>(is));
    return h;
}

template <typename S>
std::vector<S> read_raw(std::istream& is, std::size_t n) {
    std::vector<S> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(S)));
    if (!is) throw IoError("tensor container truncated");
    return buf;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor<float>& t) { write_impl(os, t, Dtype::f32); }
void write_tensor(std::ostream& os, const Tensor<double>& t) { write_impl(os, t, Dtype::f64); }

void save_tensor(const std::string& path, const Tensor<float>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_tensor(os, t);
}

void save_tensor(const std::string& path, const Tensor<double>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_tensor(os, t);
}

Dtype peek_dtype(std::istream& is) {
    const auto pos = is.tellg();
    Header h = read_header(is);
    is.seekg(pos);
    return h.dtype;
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
    Header h = read_header(is);
    const std::size_t n = Tensor<T>::count(h.shape);
    Tensor<T> out;
    out.shape = std::move(h.shape);
    if (h.dtype == Dtype::f32) {
        auto raw = read_raw<float>(is, n);
        out.data.assign(raw.begin(), raw.end());
    } else {
        auto raw = read_raw<double>(is, n);
        out.data.assign(raw.begin(), raw.end());
    }
    return out;
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open tensor container: " + path);
    return read_tensor<T>(is);
}

template Tensor<float> read_tensor<float>(std::istream&);
template Tensor<double> read_tensor<double>(std::istream&);
template Tensor<float> load_tensor<float>(const std::string&);
template Tensor<double> load_tensor<double>(const std::string&);

}  // namespace oetr::io
