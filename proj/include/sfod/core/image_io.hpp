// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdio>

#include <jpeglib.h>
#include <openssl/evp.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "sfod/core/error.hpp"
#include "sfod/core/image.hpp"

namespace sfod {

inline std::uint8_t quantize8(float v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline std::vector<std::uint8_t> to_bytes8(const Image& img) {
  std::vector<std::uint8_t> out(img.size());
  std::transform(img.pixels.begin(), img.pixels.end(), out.begin(), quantize8);
  return out;
}

inline Image from_bytes8(const std::uint8_t* data, int w, int h, int c) {
  Image img(w, h, c);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = data[i] / 255.0f;
  return img;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("short write to " + path.string());
}

inline std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string s;
  s.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(hex[md[i] >> 4]);
    s.push_back(hex[md[i] & 15]);
  }
  return s;
}

inline std::string sha256_hex(const std::vector<std::uint8_t>& bytes) { return sha256_hex(bytes.data(), bytes.size()); }

inline std::string sha256_file(const std::filesystem::path& path) {
  auto bytes = read_file_bytes(path);
  return sha256_hex(bytes.data(), bytes.size());
}

// ---- JPEG -----------------------------------------------------------------

namespace detail {

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char msg[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->msg);
  std::longjmp(err->jump, 1);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_jpeg(const Image& src, int quality) {
  const Image img = src.channels == 1 ? src : to_rgb(src);
  auto bytes = to_bytes8(img);
  jpeg_compress_struct cinfo{};
  detail::JpegErr err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = detail::jpeg_error_exit;
  unsigned char* mem = nullptr;
  unsigned long mem_size = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    throw IoError(std::string("jpeg encode: ") + err.msg);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &mem, &mem_size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = img.channels;
  cinfo.in_color_space = img.channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, std::clamp(quality, 1, 100), TRUE);
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = bytes.data() + cinfo.next_scanline * stride;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::vector<std::uint8_t> out(mem, mem + mem_size);
  std::free(mem);
  return out;
}

inline Image decode_jpeg(const std::vector<std::uint8_t>& data) {
  jpeg_decompress_struct cinfo{};
  detail::JpegErr err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = detail::jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError(std::string("jpeg decode: ") + err.msg);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.dct_method = JDCT_ISLOW;
  jpeg_start_decompress(&cinfo);
  const int w = static_cast<int>(cinfo.output_width), h = static_cast<int>(cinfo.output_height);
  const int c = cinfo.output_components;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * c);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = buf.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * c;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_bytes8(buf.data(), w, h, c);
}

// ---- PNG ------------------------------------------------------------------

inline std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError("png: unsupported channel count");
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  auto bytes = to_bytes8(img);
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&pi, nullptr, &size, 0, bytes.data(), 0, nullptr))
    throw IoError(std::string("png encode: ") + pi.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&pi, out.data(), &size, 0, bytes.data(), 0, nullptr))
    throw IoError(std::string("png encode: ") + pi.message);
  out.resize(size);
  return out;
}

inline Image decode_png(const std::vector<std::uint8_t>& data) {
  png_image pi{};
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&pi, data.data(), data.size()))
    throw IoError(std::string("png decode: ") + pi.message);
  const bool gray = (pi.format & PNG_FORMAT_FLAG_COLOR) == 0;
  pi.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int c = gray ? 1 : 3;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&pi);
    throw IoError(std::string("png decode: ") + pi.message);
  }
  return from_bytes8(buf.data(), static_cast<int>(pi.width), static_cast<int>(pi.height), c);
}

// ---- PPM/PGM (binary) -----------------------------------------------------

inline std::vector<std::uint8_t> encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw IoError("pnm: unsupported channel count");
  std::ostringstream hdr;
  hdr << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  const std::string h = hdr.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  auto bytes = to_bytes8(img);
  out.insert(out.end(), bytes.begin(), bytes.end());
  return out;
}

inline Image decode_pnm(const std::vector<std::uint8_t>& data) {
  std::size_t pos = 0;
  auto token = [&]() {
    std::string t;
    while (pos < data.size()) {
      char ch = static_cast<char>(data[pos]);
      if (ch == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!t.empty()) break;
        ++pos;
      } else {
        t.push_back(ch);
        ++pos;
      }
    }
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw IoError("pnm: unsupported magic '" + magic + "'");
  int w = 0, h = 0, maxv = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxv = std::stoi(token());
  } catch (const std::exception&) {
    throw IoError("pnm: malformed header");
  }
  if (maxv != 255 || w <= 0 || h <= 0) throw IoError("pnm: only 8-bit images supported");
  ++pos;  // single whitespace after maxval
  const int c = magic == "P5" ? 1 : 3;
  const std::size_t need = static_cast<std::size_t>(w) * h * c;
  if (data.size() < pos + need) throw IoError("pnm: truncated pixel data");
  return from_bytes8(data.data() + pos, w, h, c);
}

// ---- dispatch by extension -------------------------------------------------

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return e;
}

inline bool is_image_path(const std::filesystem::path& p) {
  const std::string e = lower_ext(p);
  return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".ppm" || e == ".pgm";
}

inline Image decode_image(const std::vector<std::uint8_t>& bytes, const std::string& ext) {
  if (ext == ".png") return decode_png(bytes);
  if (ext == ".jpg" || ext == ".jpeg") return decode_jpeg(bytes);
  if (ext == ".ppm" || ext == ".pgm") return decode_pnm(bytes);
  throw IoError("unsupported image extension '" + ext + "'");
}

inline std::vector<std::uint8_t> encode_image(const Image& img, const std::string& ext,
                                              int jpeg_quality = 95) {
  if (ext == ".png") return encode_png(img);
  if (ext == ".jpg" || ext == ".jpeg") return encode_jpeg(img, jpeg_quality);
  if (ext == ".ppm" || ext == ".pgm") return encode_pnm(img);
  throw IoError("unsupported image extension '" + ext + "'");
}

inline Image read_image(const std::filesystem::path& path) {
  return decode_image(read_file_bytes(path), lower_ext(path));
}

inline void write_image(const std::filesystem::path& path, const Image& img) {
  auto bytes = encode_image(img, lower_ext(path));
  write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace sfod
