#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "infogram/error.hpp"
#include "infogram/tensor.hpp"

// NPY v1.0: "\x93NUMPY", version bytes 01 00, little-endian uint16 header
// length, then an ASCII dict literal padded with spaces to make the whole
// preamble a multiple of 64 bytes, terminated by '\n'.  Payload is a flat
// C-order array.

static_assert(std::endian::native == std::endian::little,
              "NPY reader/writer assumes a little-endian host");

namespace infogram {

namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

// Returns the value following "'key':" in the header dict, trimmed of
// spaces, up to the next top-level ',' or '}'.
std::string dict_value(const std::string& header, const std::string& key) {
    std::string quoted = "'" + key + "'";
    std::size_t k = header.find(quoted);
    if (k == std::string::npos)
        throw FormatError("npy: header lacks key " + quoted);
    std::size_t colon = header.find(':', k + quoted.size());
    if (colon == std::string::npos)
        throw FormatError("npy: malformed header near " + quoted);
    std::size_t pos = colon + 1;
    int depth = 0;
    std::string out;
    while (pos < header.size()) {
        char c = header[pos];
        if (c == '(') depth++;
        if (c == ')') depth--;
        if ((c == ',' || c == '}') && depth == 0) break;
        out += c;
        ++pos;
    }
    std::size_t a = out.find_first_not_of(" \t");
    std::size_t b = out.find_last_not_of(" \t");
    if (a == std::string::npos) return "";
    return out.substr(a, b - a + 1);
}

std::vector<std::size_t> parse_shape(const std::string& text) {
    if (text.size() < 2 || text.front() != '(' || text.back() != ')')
        throw FormatError("npy: shape is not a tuple: " + text);
    std::vector<std::size_t> shape;
    std::string inner = text.substr(1, text.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t a = item.find_first_not_of(" \t");
        if (a == std::string::npos) continue; // trailing comma of 1-tuples
        std::size_t b = item.find_last_not_of(" \t");
        item = item.substr(a, b - a + 1);
        try {
            shape.push_back(static_cast<std::size_t>(std::stoull(item)));
        } catch (const std::exception&) {
            throw FormatError("npy: bad shape entry '" + item + "'");
        }
    }
    return shape;
}

} // namespace

Tensor load_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("npy: cannot open " + path);

    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0)
        throw FormatError("npy: bad magic in " + path);

    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    if (!in || version[0] != 1 || version[1] != 0)
        throw FormatError("npy: unsupported version in " + path);

    unsigned char len_bytes[2];
    in.read(reinterpret_cast<char*>(len_bytes), 2);
    if (!in) throw FormatError("npy: truncated header length in " + path);
    std::size_t header_len = static_cast<std::size_t>(len_bytes[0]) |
                             (static_cast<std::size_t>(len_bytes[1]) << 8);

    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw FormatError("npy: truncated header in " + path);

    std::string descr = dict_value(header, "descr");
    std::string order = dict_value(header, "fortran_order");
    std::vector<std::size_t> shape = parse_shape(dict_value(header, "shape"));

    if (order == "True")
        throw FormatError("npy: Fortran-ordered file not supported: " + path);
    if (order != "False")
        throw FormatError("npy: bad fortran_order value '" + order + "'");

    std::size_t item_size = 0;
    if (descr == "'<f8'") item_size = 8;
    else if (descr == "'<f4'") item_size = 4;
    else throw UnsupportedDtypeError("npy: dtype " + descr + " not supported, need '<f8' or '<f4'");

    std::size_t count = shape_numel(shape);
    std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
    if (payload.size() != count * item_size)
        throw CorruptionError("npy: header declares " + std::to_string(count) +
                              " elements but payload holds " +
                              std::to_string(payload.size() / item_size));

    std::vector<double> values(count);
    if (item_size == 8) {
        std::memcpy(values.data(), payload.data(), payload.size());
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, payload.data() + i * 4, 4);
            values[i] = static_cast<double>(f);
        }
    }
    return Tensor(std::move(shape), std::move(values));
}

void save_tensor(const Tensor& t, const std::string& path) {
    std::ostringstream dict;
    dict << "{'descr': '<f8', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < t.rank(); ++i) {
        dict << t.shape()[i];
        if (t.rank() == 1 || i + 1 < t.rank()) dict << ",";
        if (i + 1 < t.rank()) dict << " ";
    }
    dict << "), }";

    std::string header = dict.str();
    std::size_t unpadded = 6 + 2 + 2 + header.size() + 1;
    std::size_t padded = (unpadded + 63) / 64 * 64;
    header.append(padded - unpadded, ' ');
    header += '\n';

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("npy: cannot write " + path);

    out.write(kMagic, 6);
    unsigned char version[2] = {1, 0};
    out.write(reinterpret_cast<char*>(version), 2);
    unsigned char len_bytes[2] = {
        static_cast<unsigned char>(header.size() & 0xFF),
        static_cast<unsigned char>((header.size() >> 8) & 0xFF)};
    out.write(reinterpret_cast<char*>(len_bytes), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!out) throw IoError("npy: write failed for " + path);
}

} // namespace infogram
