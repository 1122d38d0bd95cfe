#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "facefit/common.hpp"

// Little-endian binary file helpers shared by the P3DM / PFM / PGM codecs.
// Read errors report the byte offset at which the file ran short.

namespace facefit::detail {

static_assert(std::endian::native == std::endian::little,
              "file codecs assume a little-endian host");

struct FileReader {
    std::FILE* f = nullptr;
    std::string path;
    std::uint64_t offset = 0;

    explicit FileReader(const std::string& p) : path(p) {
        f = std::fopen(p.c_str(), "rb");
        if (!f) fail(ErrorKind::IoFailure, "cannot open '" + p + "' for reading");
    }
    ~FileReader() {
        if (f) std::fclose(f);
    }
    FileReader(const FileReader&) = delete;
    FileReader& operator=(const FileReader&) = delete;

    void read_bytes(void* dst, std::size_t n) {
        if (std::fread(dst, 1, n, f) != n)
            fail(ErrorKind::IoFailure,
                 "'" + path + "' truncated at byte offset " + std::to_string(offset));
        offset += n;
    }
    std::uint32_t read_u32() {
        std::uint32_t v = 0;
        read_bytes(&v, 4);
        return v;
    }
    float read_f32() {
        float v = 0;
        read_bytes(&v, 4);
        return v;
    }
    void read_f32_array(float* dst, std::size_t count) { read_bytes(dst, count * 4); }
    void read_u32_array(std::uint32_t* dst, std::size_t count) { read_bytes(dst, count * 4); }
    bool at_eof() {
        int c = std::fgetc(f);
        if (c == EOF) return true;
        std::ungetc(c, f);
        return false;
    }
};

struct FileWriter {
    std::FILE* f = nullptr;
    std::string path;

    explicit FileWriter(const std::string& p) : path(p) {
        f = std::fopen(p.c_str(), "wb");
        if (!f) fail(ErrorKind::IoFailure, "cannot open '" + p + "' for writing");
    }
    ~FileWriter() {
        if (f) std::fclose(f);
    }
    FileWriter(const FileWriter&) = delete;
    FileWriter& operator=(const FileWriter&) = delete;

    void write_bytes(const void* src, std::size_t n) {
        if (std::fwrite(src, 1, n, f) != n)
            fail(ErrorKind::IoFailure, "short write to '" + path + "'");
    }
    void write_u32(std::uint32_t v) { write_bytes(&v, 4); }
    void write_f32(float v) { write_bytes(&v, 4); }
    void write_f32_array(const float* src, std::size_t count) { write_bytes(src, count * 4); }
    void write_u32_array(const std::uint32_t* src, std::size_t count) { write_bytes(src, count * 4); }
};

} // namespace facefit::detail
