#include "occ/avatar/codecs.hpp"
#include "occ/avatar/corpus.hpp"
#include "occ/avatar/image.hpp"
#include "occ/rng.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <jpeglib.h>
#include <png.h>

namespace occ::avatar {

namespace fs = std::filesystem;

int max_pixel_deviation(const Image& a, const Image& b) {
  if (a.side != b.side)
    throw DomainError("max_pixel_deviation: size mismatch");
  int worst = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i)
    worst = std::max(worst, std::abs(int(a.rgb[i]) - int(b.rgb[i])));
  return worst;
}

Image resize(const Image& img, int target_side) {
  if (target_side <= 0) throw DomainError("resize: non-positive target side");
  if (img.side <= 0) throw DomainError("resize: empty source image");

  Image out(target_side);
  out.source_id = img.source_id;
  out.lossy = img.lossy;
  out.size_tag = is_size_variant(target_side) ? target_side : 0;

  if (target_side == img.side) {
    out.rgb = img.rgb;
    return out;
  }

  const double scale = static_cast<double>(img.side) / target_side;
  for (int y = 0; y < target_side; ++y) {
    double sy = (y + 0.5) * scale - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(img.side - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, img.side - 1);
    const double fy = sy - y0;
    for (int x = 0; x < target_side; ++x) {
      double sx = (x + 0.5) * scale - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(img.side - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, img.side - 1);
      const double fx = sx - x0;
      const std::uint8_t* p00 = img.px(y0, x0);
      const std::uint8_t* p01 = img.px(y0, x1);
      const std::uint8_t* p10 = img.px(y1, x0);
      const std::uint8_t* p11 = img.px(y1, x1);
      std::uint8_t* dst = out.px(y, x);
      for (int c = 0; c < 3; ++c) {
        const double top = p00[c] + (p01[c] - p00[c]) * fx;
        const double bot = p10[c] + (p11[c] - p10[c]) * fx;
        const double v = top + (bot - top) * fy;
        dst[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

// --- JPEG (libjpeg) --------------------------------------------------------

namespace {

struct JpegErr {
  jpeg_error_mgr pub;
  jmp_buf jump;
  char msg[JMSG_LENGTH_MAX];
};

void jpeg_error_trap(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->msg);
  longjmp(err->jump, 1);
}

}  // namespace

std::vector<std::uint8_t> jpeg_encode(const Image& img, int quality) {
  if (quality < 1 || quality > 100)
    throw DomainError("jpeg_encode: quality outside [1,100]");
  if (img.side <= 0) throw DomainError("jpeg_encode: empty image");

  jpeg_compress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_trap;

  unsigned char* buf = nullptr;
  unsigned long buf_len = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    if (buf) free(buf);
    throw FormatError(std::string("jpeg encode: ") + err.msg);
  }

  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &buf_len);
  cinfo.image_width = static_cast<JDIMENSION>(img.side);
  cinfo.image_height = static_cast<JDIMENSION>(img.side);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  // keep RGB components: the 8-bit YCbCr round trip alone costs ~4 levels,
  // which would swamp the q=100 fidelity contract
  jpeg_set_colorspace(&cinfo, JCS_RGB);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.dct_method = JDCT_FLOAT;
  // 4:4:4 so chroma detail survives; the channel distances feed the matcher.
  for (int c = 0; c < cinfo.num_components; ++c) {
    cinfo.comp_info[c].h_samp_factor = 1;
    cinfo.comp_info[c].v_samp_factor = 1;
  }
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.side) * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.rgb.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  std::vector<std::uint8_t> out(buf, buf + buf_len);
  free(buf);
  return out;
}

Image jpeg_decode(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_trap;

  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError(std::string("jpeg decode: ") + err.msg);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  cinfo.dct_method = JDCT_FLOAT;
  jpeg_start_decompress(&cinfo);
  if (cinfo.output_width != cinfo.output_height) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError("jpeg decode: non-square image");
  }

  Image img(static_cast<int>(cinfo.output_width));
  img.lossy = true;
  const std::size_t stride = static_cast<std::size_t>(img.side) * 3;
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + cinfo.output_scanline * stride;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (is_size_variant(img.side)) img.size_tag = img.side;
  return img;
}

Image lossy_reencode(const Image& img, int quality) {
  Image out = jpeg_decode(jpeg_encode(img, quality));
  out.source_id = img.source_id;
  out.size_tag = img.size_tag;
  out.lossy = true;
  return out;
}

// --- PNG (libpng) ----------------------------------------------------------

std::vector<std::uint8_t> png_encode(const Image& img) {
  if (img.side <= 0) throw DomainError("png_encode: empty image");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("png encode: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("png encode: init failed");
  }

  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png encode: libpng error");
  }

  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        auto* vec = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        vec->insert(vec->end(), data, data + len);
      },
      nullptr);

  png_set_IHDR(png, info, static_cast<png_uint_32>(img.side),
               static_cast<png_uint_32>(img.side), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.side) * 3;
  for (int y = 0; y < img.side; ++y)
    png_write_row(png, const_cast<png_bytep>(img.rgb.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

namespace {

struct PngReadCtx {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

}  // namespace

Image png_decode(std::span<const std::uint8_t> bytes) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw FormatError("png decode: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("png decode: init failed");
  }

  PngReadCtx ctx{bytes.data(), bytes.size(), 0};
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png decode: libpng error");
  }

  png_set_read_fn(png, &ctx, [](png_structp p, png_bytep out, png_size_t len) {
    auto* c = static_cast<PngReadCtx*>(png_get_io_ptr(p));
    if (c->pos + len > c->size) png_error(p, "short read");
    std::memcpy(out, c->data + c->pos, len);
    c->pos += len;
  });

  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  if (w != h) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png decode: non-square image");
  }
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  img = Image(static_cast<int>(w));
  const std::size_t stride = static_cast<std::size_t>(img.side) * 3;
  for (png_uint_32 y = 0; y < h; ++y)
    png_read_row(png, img.rgb.data() + y * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// --- procedural masters ----------------------------------------------------

bool flat_background(const Image& img) {
  std::unordered_map<std::uint32_t, int> counts;
  const std::size_t n = static_cast<std::size_t>(img.side) * img.side;
  counts.reserve(n / 4);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = img.rgb.data() + i * 3;
    const std::uint32_t key =
        (std::uint32_t(p[0]) << 16) | (std::uint32_t(p[1]) << 8) | p[2];
    ++counts[key];
  }
  std::uint32_t mode = 0;
  int best = -1;
  for (const auto& [key, c] : counts) {
    if (c > best || (c == best && key < mode)) {
      best = c;
      mode = key;
    }
  }
  const int mr = int(mode >> 16), mg = int((mode >> 8) & 0xff), mb = int(mode & 0xff);
  std::size_t near_mode = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* p = img.rgb.data() + i * 3;
    if (std::abs(int(p[0]) - mr) <= 1 && std::abs(int(p[1]) - mg) <= 1 &&
        std::abs(int(p[2]) - mb) <= 1)
      ++near_mode;
  }
  return near_mode * 10 >= n * 4;  // >= 40%
}

namespace {

constexpr int kMasterSide = 400;

// (g+1)x(g+1) lattice of random values in [-1,1], sampled bilinearly.
struct NoiseGrid {
  int g;
  std::vector<float> v;

  NoiseGrid(int grid, Rng& rng) : g(grid), v((grid + 1) * (grid + 1)) {
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  }

  float sample(double u, double w) const {
    const double gu = u * g, gw = w * g;
    const int x0 = std::min(static_cast<int>(gu), g - 1);
    const int y0 = std::min(static_cast<int>(gw), g - 1);
    const double fx = gu - x0, fy = gw - y0;
    const float* row0 = v.data() + y0 * (g + 1) + x0;
    const float* row1 = row0 + (g + 1);
    const double top = row0[0] + (row0[1] - row0[0]) * fx;
    const double bot = row1[0] + (row1[1] - row1[0]) * fx;
    return static_cast<float>(top + (bot - top) * fy);
  }
};

Image synth_texture(Rng& rng) {
  Image img(kMasterSide);
  const int side = kMasterSide;

  // Corner-anchored color gradient.
  float corner[4][3];
  for (auto& c : corner)
    for (float& ch : c) ch = static_cast<float>(rng.uniform(0.0, 255.0));

  // Per-channel multi-octave value noise.
  std::vector<NoiseGrid> grids;
  grids.reserve(12);
  for (int ch = 0; ch < 3; ++ch)
    for (int oct = 0; oct < 4; ++oct) grids.emplace_back(4 << oct, rng);
  const float noise_amp = static_cast<float>(rng.uniform(40.0, 90.0));

  for (int y = 0; y < side; ++y) {
    const double fy = static_cast<double>(y) / (side - 1);
    for (int x = 0; x < side; ++x) {
      const double fx = static_cast<double>(x) / (side - 1);
      std::uint8_t* p = img.px(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = corner[0][ch] + (corner[1][ch] - corner[0][ch]) * fx;
        const double bot = corner[2][ch] + (corner[3][ch] - corner[2][ch]) * fx;
        double v = top + (bot - top) * fy;
        float amp = noise_amp;
        for (int oct = 0; oct < 4; ++oct) {
          v += grids[ch * 4 + oct].sample(fx, fy) * amp;
          amp *= 0.55f;
        }
        p[ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }

  // A few solid shapes blended on top.
  const int shapes = 3 + static_cast<int>(rng.index(6));
  for (int s = 0; s < shapes; ++s) {
    float color[3];
    for (float& c : color) c = static_cast<float>(rng.uniform(0.0, 255.0));
    const float alpha = static_cast<float>(rng.uniform(0.35, 0.85));
    const int kind = static_cast<int>(rng.index(3));
    if (kind == 0) {  // circle
      const int cx = static_cast<int>(rng.index(side));
      const int cy = static_cast<int>(rng.index(side));
      const int r = 30 + static_cast<int>(rng.index(110));
      const int r2 = r * r;
      for (int y = std::max(0, cy - r); y < std::min(side, cy + r); ++y)
        for (int x = std::max(0, cx - r); x < std::min(side, cx + r); ++x) {
          const int dx = x - cx, dy = y - cy;
          if (dx * dx + dy * dy > r2) continue;
          std::uint8_t* p = img.px(y, x);
          for (int ch = 0; ch < 3; ++ch)
            p[ch] = static_cast<std::uint8_t>(p[ch] + (color[ch] - p[ch]) * alpha);
        }
    } else if (kind == 1) {  // rectangle
      const int x0 = static_cast<int>(rng.index(side));
      const int y0 = static_cast<int>(rng.index(side));
      const int w = 40 + static_cast<int>(rng.index(160));
      const int h = 40 + static_cast<int>(rng.index(160));
      for (int y = y0; y < std::min(side, y0 + h); ++y)
        for (int x = x0; x < std::min(side, x0 + w); ++x) {
          std::uint8_t* p = img.px(y, x);
          for (int ch = 0; ch < 3; ++ch)
            p[ch] = static_cast<std::uint8_t>(p[ch] + (color[ch] - p[ch]) * alpha);
        }
    } else {  // diagonal stripe
      const double offset = rng.uniform(-side, side);
      const double slope = rng.uniform(-1.5, 1.5);
      const int width = 14 + static_cast<int>(rng.index(50));
      for (int y = 0; y < side; ++y) {
        const int x0 = static_cast<int>(offset + slope * y);
        for (int x = std::max(0, x0); x < std::min(side, x0 + width); ++x) {
          std::uint8_t* p = img.px(y, x);
          for (int ch = 0; ch < 3; ++ch)
            p[ch] = static_cast<std::uint8_t>(p[ch] + (color[ch] - p[ch]) * alpha);
        }
      }
    }
  }
  return img;
}

std::string identity_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "id%04d", index);
  return buf;
}

}  // namespace

Image generate_master(std::uint64_t seed, int identity_index,
                      bool forbid_flat) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(identity_index),
                        static_cast<std::uint64_t>(attempt)));
    Image img = synth_texture(rng);
    if (forbid_flat && flat_background(img)) continue;
    img.source_id = identity_name(identity_index);
    img.size_tag = 400;
    return img;
  }
  throw CapacityError("generate_master: could not synthesize a non-flat image");
}

Corpus Corpus::generate(const CorpusSpec& spec) {
  if (spec.identities < 1)
    throw DomainError("Corpus::generate: identity count must be >= 1");
  if (spec.quality < 1 || spec.quality > 100)
    throw DomainError("Corpus::generate: quality outside [1,100]");

  Corpus c;
  c.spec_ = spec;
  c.generated_ = true;
  c.ids_.reserve(spec.identities);
  c.variants_.resize(spec.identities);
  for (int i = 0; i < spec.identities; ++i) {
    const Image master = generate_master(spec.seed, i, spec.forbid_flat);
    c.ids_.push_back(master.source_id);
    for (int s : kSizeVariants)
      c.variants_[i][s] = jpeg_encode(resize(master, s), spec.quality);
  }
  return c;
}

int Corpus::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return static_cast<int>(i);
  throw NotFoundError("Corpus: unknown identity " + id);
}

Image Corpus::master(int i) const {
  if (i < 0 || i >= size()) throw NotFoundError("Corpus: identity out of range");
  if (generated_)
    return generate_master(spec_.seed, i, spec_.forbid_flat);
  Image img = png_decode(master_png_.at(i));
  img.source_id = ids_[i];
  img.size_tag = 400;
  return img;
}

Image Corpus::variant(int i, int side) const {
  Image img = jpeg_decode(variant_bytes(i, side));
  img.source_id = ids_.at(i);
  return img;
}

const std::vector<std::uint8_t>& Corpus::variant_bytes(int i, int side) const {
  if (i < 0 || i >= size()) throw NotFoundError("Corpus: identity out of range");
  auto it = variants_[i].find(side);
  if (it == variants_[i].end())
    throw NotFoundError("Corpus: no " + std::to_string(side) +
                        " variant for " + ids_[i]);
  return it->second;
}

void Corpus::save(const std::string& dir) const {
  for (int i = 0; i < size(); ++i) {
    const fs::path base = fs::path(dir) / ids_[i];
    fs::create_directories(base);
    const std::vector<std::uint8_t> png = png_encode(master(i));
    std::ofstream m(base / "master.png", std::ios::binary);
    m.write(reinterpret_cast<const char*>(png.data()),
            static_cast<std::streamsize>(png.size()));
    for (const auto& [side, bytes] : variants_[i]) {
      std::ofstream f(base / (std::to_string(side) + ".jpg"), std::ios::binary);
      f.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    }
  }
}

namespace {

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw NotFoundError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

Corpus Corpus::load(const std::string& dir) {
  Corpus c;
  c.generated_ = false;
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) entries.push_back(e.path());
  std::sort(entries.begin(), entries.end());
  if (entries.empty()) throw NotFoundError("Corpus::load: no identities in " + dir);
  for (const auto& e : entries) {
    c.ids_.push_back(e.filename().string());
    c.master_png_.push_back(read_file(e / "master.png"));
    auto& vars = c.variants_.emplace_back();
    for (int s : kSizeVariants) vars[s] = read_file(e / (std::to_string(s) + ".jpg"));
  }
  c.spec_.identities = c.size();
  return c;
}

nn::Tensor to_input_tensor(const Image& img, int input_side) {
  const Image scaled = resize(img, input_side);
  nn::Tensor t({3, input_side, input_side});
  float* out = t.data();
  const std::size_t plane = static_cast<std::size_t>(input_side) * input_side;
  for (std::size_t i = 0; i < plane; ++i) {
    const std::uint8_t* p = scaled.rgb.data() + i * 3;
    out[i] = p[0] / 255.0f;
    out[plane + i] = p[1] / 255.0f;
    out[2 * plane + i] = p[2] / 255.0f;
  }
  return t;
}

}  // namespace occ::avatar
