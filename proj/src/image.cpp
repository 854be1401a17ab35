#include "oetr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "oetr/errors.hpp"

namespace oetr::img {
namespace {

// Reads one whitespace/comment-delimited header token.
std::string next_token(std::istringstream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {}
            continue;
        }
        if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = is.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(is.get()));
            return tok;
        }
    }
    throw IoError("truncated image header");
}

}  // namespace

Tensor<float> decode_image(const std::string& bytes) {
    std::istringstream is(bytes, std::ios::binary);
    std::string magic = next_token(is);
    std::size_t channels;
    if (magic == "P6")
        channels = 3;
    else if (magic == "P5")
        channels = 1;
    else
        throw IoError("unsupported image format (want binary PPM P6 or PGM P5)");
    const int w = std::stoi(next_token(is));
    const int h = std::stoi(next_token(is));
    const int maxval = std::stoi(next_token(is));
    if (w <= 0 || h <= 0) throw InvalidInput("empty image");
    if (maxval != 255) throw IoError("only maxval 255 images are supported");
    is.get();  // single whitespace after maxval

    const std::size_t n = static_cast<std::size_t>(w) * h * channels;
    std::string raw(n, '\0');
    is.read(raw.data(), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n)) throw IoError("truncated image data");

    Tensor<float> out({channels, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < channels; ++c)
            out.data[c * plane + i] =
                static_cast<float>(static_cast<unsigned char>(raw[i * channels + c])) / 255.0f;
    return out;
}

std::string encode_image(const Tensor<float>& image) {
    if (image.rank() != 3 || (image.shape[0] != 1 && image.shape[0] != 3))
        throw InvalidShape("encode_image: expected [1|3,H,W]");
    const std::size_t C = image.shape[0], H = image.shape[1], W = image.shape[2];
    std::ostringstream os(std::ios::binary);
    os << (C == 3 ? "P6" : "P5") << "\n" << W << " " << H << "\n255\n";
    const std::size_t plane = H * W;
    std::string raw(plane * C, '\0');
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < C; ++c) {
            const float v = std::clamp(image.data[c * plane + i], 0.0f, 1.0f);
            raw[i * C + c] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
        }
    os.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    return os.str();
}

Tensor<float> load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open image: " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return decode_image(buf.str());
}

void save_image(const std::string& path, const Tensor<float>& image) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open image for writing: " + path);
    const std::string bytes = encode_image(image);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor<float> ensure_rgb(const Tensor<float>& image) {
    if (image.rank() != 3) throw InvalidShape("ensure_rgb: expected [C,H,W]");
    if (image.shape[0] == 3) return image;
    if (image.shape[0] != 1) throw InvalidShape("ensure_rgb: expected 1 or 3 channels");
    Tensor<float> out({3, image.shape[1], image.shape[2]});
    const std::size_t plane = image.shape[1] * image.shape[2];
    for (std::size_t c = 0; c < 3; ++c)
        std::copy_n(image.data.begin(), plane, out.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
    return out;
}

Tensor<float> crop_resample(const Tensor<float>& image, double x0, double y0, double w, double h,
                            int out_w, int out_h) {
    if (image.rank() != 3) throw InvalidShape("crop_resample: expected [C,H,W]");
    if (!(w > 0) || !(h > 0) || out_w <= 0 || out_h <= 0)
        throw InvalidInput("crop_resample: degenerate window");
    const std::size_t C = image.shape[0];
    const int H = static_cast<int>(image.shape[1]);
    const int W = static_cast<int>(image.shape[2]);
    Tensor<float> out({C, static_cast<std::size_t>(out_h), static_cast<std::size_t>(out_w)});
    const double sx = w / out_w, sy = h / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = y0 + (oy + 0.5) * sy - 0.5;
        const int y0i = static_cast<int>(std::floor(fy));
        const double wy = fy - y0i;
        const int ya = std::clamp(y0i, 0, H - 1), yb = std::clamp(y0i + 1, 0, H - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = x0 + (ox + 0.5) * sx - 0.5;
            const int x0i = static_cast<int>(std::floor(fx));
            const double wx = fx - x0i;
            const int xa = std::clamp(x0i, 0, W - 1), xb = std::clamp(x0i + 1, 0, W - 1);
            for (std::size_t c = 0; c < C; ++c) {
                const float* plane = image.data.data() + c * H * W;
                const double top = plane[ya * W + xa] * (1 - wx) + plane[ya * W + xb] * wx;
                const double bot = plane[yb * W + xa] * (1 - wx) + plane[yb * W + xb] * wx;
                out.data[(c * out_h + oy) * out_w + ox] = static_cast<float>(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

Tensor<float> resize_bilinear(const Tensor<float>& image, int out_w, int out_h) {
    return crop_resample(image, 0.0, 0.0, static_cast<double>(image.shape[2]),
                         static_cast<double>(image.shape[1]), out_w, out_h);
}

}  // namespace oetr::img
