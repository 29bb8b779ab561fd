#include "poseforge/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace poseforge {

namespace {

constexpr char kMagic[4] = {'P', 'F', 'G', '1'};

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<unsigned char>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<unsigned char>& buf, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(buf, v);
}

struct Reader {
    const std::vector<unsigned char>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        std::uint64_t v = u64();
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
};

void append_params(std::vector<double>& payload, const std::vector<Tensor>& params) {
    for (const Tensor& p : params)
        payload.insert(payload.end(), p.values().begin(), p.values().end());
}

void take_params(const std::vector<double>& payload, std::size_t& cursor, std::vector<Tensor>& params) {
    for (Tensor& p : params) {
        if (cursor + static_cast<std::size_t>(p.size()) > payload.size())
            throw CheckpointError("checkpoint payload shorter than the architecture requires");
        std::copy(payload.begin() + static_cast<std::ptrdiff_t>(cursor),
                  payload.begin() + static_cast<std::ptrdiff_t>(cursor + static_cast<std::size_t>(p.size())),
                  p.values().begin());
        cursor += static_cast<std::size_t>(p.size());
    }
}

void expect_kind(const Checkpoint& ck, Checkpoint::Kind kind, const char* what) {
    if (ck.kind != kind) throw CheckpointError(std::string("checkpoint is not a ") + what + " model");
}

void expect_consumed(const std::vector<double>& payload, std::size_t cursor) {
    if (cursor != payload.size()) throw CheckpointError("checkpoint payload longer than the architecture requires");
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, Checkpoint::kVersion);
    put_u32(buf, ck.kind);
    put_u32(buf, static_cast<std::uint32_t>(ck.dims.size()));
    for (std::uint32_t d : ck.dims) put_u32(buf, d);
    put_u64(buf, ck.payload.size());
    for (double v : ck.payload) put_f64(buf, v);
    std::uint32_t crc = static_cast<std::uint32_t>(crc32(0, buf.data(), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("write failure on " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 20) throw CheckpointError(path + ": not a checkpoint (too short)");

    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
        stored_crc |= static_cast<std::uint32_t>(buf[buf.size() - 4 + static_cast<std::size_t>(i)]) << (8 * i);
    std::uint32_t crc =
        static_cast<std::uint32_t>(crc32(0, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (crc != stored_crc) throw CheckpointError(path + ": checksum mismatch");

    Reader r{buf};
    r.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0) throw CheckpointError(path + ": bad magic");
    r.pos = 4;
    std::uint32_t version = r.u32();
    if (version != Checkpoint::kVersion)
        throw CheckpointError(path + ": unsupported format version " + std::to_string(version));

    Checkpoint ck;
    ck.kind = r.u32();
    std::uint32_t ndims = r.u32();
    for (std::uint32_t i = 0; i < ndims; ++i) ck.dims.push_back(r.u32());
    std::uint64_t count = r.u64();
    if (buf.size() != r.pos + count * 8 + 4) throw CheckpointError(path + ": payload size mismatch");
    ck.payload.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) ck.payload.push_back(r.f64());
    return ck;
}

void save_pose_gan(const std::string& path, const SinglePoseGenerator& g0, const PoseCritic& d0) {
    Checkpoint ck;
    ck.kind = Checkpoint::PoseGan;
    ck.dims = {static_cast<std::uint32_t>(g0.m), static_cast<std::uint32_t>(g0.C),
               static_cast<std::uint32_t>(g0.J)};
    // Hidden layer widths follow the fixed dims.
    ck.dims.push_back(static_cast<std::uint32_t>(g0.mlp.dims.size() - 2));
    for (std::size_t i = 1; i + 1 < g0.mlp.dims.size(); ++i)
        ck.dims.push_back(static_cast<std::uint32_t>(g0.mlp.dims[i]));
    append_params(ck.payload, g0.mlp.params);
    append_params(ck.payload, d0.mlp.params);
    write_checkpoint(path, ck);
}

std::pair<SinglePoseGenerator, PoseCritic> load_pose_gan(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    expect_kind(ck, Checkpoint::PoseGan, "pose generator");
    if (ck.dims.size() < 4) throw CheckpointError(path + ": dim header too short");
    int m = static_cast<int>(ck.dims[0]);
    int C = static_cast<int>(ck.dims[1]);
    int J = static_cast<int>(ck.dims[2]);
    int nh = static_cast<int>(ck.dims[3]);
    if (static_cast<int>(ck.dims.size()) != 4 + nh) throw CheckpointError(path + ": dim header inconsistent");
    std::vector<int> hidden;
    for (int i = 0; i < nh; ++i) hidden.push_back(static_cast<int>(ck.dims[static_cast<std::size_t>(4 + i)]));

    Rng rng(0);
    SinglePoseGenerator g0 = SinglePoseGenerator::init(m, C, J, hidden, rng);
    PoseCritic d0 = PoseCritic::init(C, J, hidden, rng);
    std::size_t cursor = 0;
    take_params(ck.payload, cursor, g0.mlp.params);
    take_params(ck.payload, cursor, d0.mlp.params);
    expect_consumed(ck.payload, cursor);
    return {std::move(g0), std::move(d0)};
}

void save_seq_gan(const std::string& path, const SequenceGenerator& gps, const SequenceDiscriminator& dps) {
    Checkpoint ck;
    ck.kind = Checkpoint::SeqGan;
    ck.dims = {static_cast<std::uint32_t>(gps.n), static_cast<std::uint32_t>(gps.m),
               static_cast<std::uint32_t>(gps.hidden), static_cast<std::uint32_t>(gps.C),
               static_cast<std::uint32_t>(dps.J)};
    append_params(ck.payload, gps.params);
    append_params(ck.payload, dps.params);
    write_checkpoint(path, ck);
}

std::pair<SequenceGenerator, SequenceDiscriminator> load_seq_gan(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    expect_kind(ck, Checkpoint::SeqGan, "sequence");
    if (ck.dims.size() != 5) throw CheckpointError(path + ": dim header inconsistent");
    Rng rng(0);
    SequenceGenerator gps = SequenceGenerator::init(static_cast<int>(ck.dims[0]), static_cast<int>(ck.dims[1]),
                                                    static_cast<int>(ck.dims[2]), static_cast<int>(ck.dims[3]), rng);
    SequenceDiscriminator dps = SequenceDiscriminator::init(static_cast<int>(ck.dims[4]),
                                                            static_cast<int>(ck.dims[3]),
                                                            static_cast<int>(ck.dims[2]), rng);
    std::size_t cursor = 0;
    take_params(ck.payload, cursor, gps.params);
    take_params(ck.payload, cursor, dps.params);
    expect_consumed(ck.payload, cursor);
    return {std::move(gps), std::move(dps)};
}

void save_skel2img(const std::string& path, const TransformerF& f) {
    Checkpoint ck;
    ck.kind = Checkpoint::Skel2Img;
    ck.dims = {static_cast<std::uint32_t>(f.J), static_cast<std::uint32_t>(f.width),
               static_cast<std::uint32_t>(f.height)};
    append_params(ck.payload, f.params);
    write_checkpoint(path, ck);
}

TransformerF load_skel2img(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    expect_kind(ck, Checkpoint::Skel2Img, "skeleton-to-image");
    if (ck.dims.size() != 3) throw CheckpointError(path + ": dim header inconsistent");
    Rng rng(0);
    TransformerF f = TransformerF::init(static_cast<int>(ck.dims[0]), static_cast<int>(ck.dims[1]),
                                        static_cast<int>(ck.dims[2]), rng);
    std::size_t cursor = 0;
    take_params(ck.payload, cursor, f.params);
    expect_consumed(ck.payload, cursor);
    return f;
}

void save_classifier(const std::string& path, const ActionClassifier& clf) {
    Checkpoint ck;
    ck.kind = Checkpoint::Classifier;
    ck.dims = {static_cast<std::uint32_t>(clf.J), static_cast<std::uint32_t>(clf.C),
               static_cast<std::uint32_t>(clf.pose_stream.dims[1])};
    append_params(ck.payload, clf.pose_stream.params);
    append_params(ck.payload, clf.motion_stream.params);
    write_checkpoint(path, ck);
}

ActionClassifier load_classifier(const std::string& path) {
    Checkpoint ck = read_checkpoint(path);
    expect_kind(ck, Checkpoint::Classifier, "classifier");
    if (ck.dims.size() != 3) throw CheckpointError(path + ": dim header inconsistent");
    ActionClassifier clf;
    clf.J = static_cast<int>(ck.dims[0]);
    clf.C = static_cast<int>(ck.dims[1]);
    int hidden = static_cast<int>(ck.dims[2]);
    Rng rng(0);
    clf.pose_stream = Mlp::init({2 * clf.J, hidden, clf.C}, rng);
    clf.motion_stream = Mlp::init({2 * clf.J, hidden, clf.C}, rng);
    std::size_t cursor = 0;
    take_params(ck.payload, cursor, clf.pose_stream.params);
    take_params(ck.payload, cursor, clf.motion_stream.params);
    expect_consumed(ck.payload, cursor);
    return clf;
}

}  // namespace poseforge
