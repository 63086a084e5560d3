#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dwmark/attacks.hpp"
#include "dwmark/codec.hpp"
#include "dwmark/metrics.hpp"
#include "support/synthetic.hpp"

using namespace dwmark;
using dwmark::testsupport::make_cover;
using dwmark::testsupport::make_noise_image;

namespace {

Message random_message(std::uint64_t seed, int len = kMessageLength) {
    Rng rng(seed);
    Message m(len);
    for (auto& b : m) b = rng.next_u64() & 1;
    return m;
}

std::vector<double> residual(const ImageBuffer& wm, const ImageBuffer& cover) {
    std::vector<double> r(wm.pixels.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = static_cast<double>(wm.pixels[i]) - static_cast<double>(cover.pixels[i]);
    return r;
}

double normalized_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("embed/decode round trip is exact on smooth and noisy covers") {
    for (int t = 0; t < 24; ++t) {
        ImageBuffer cover = (t % 2) ? make_noise_image(t, 128, 128) : make_cover(t, 128, 128);
        Message msg = random_message(500 + t);
        CodecKey key{42ULL * t + 7};
        ImageBuffer encoded = embed_block(cover, msg, key);
        REQUIRE(binarize(decode_block(encoded, key)) == msg);
    }
}

TEST_CASE("embedded block psnr lands within half a dB of the target") {
    for (int t = 0; t < 16; ++t) {
        ImageBuffer cover = (t % 2) ? make_noise_image(90 + t, 128, 128) : make_cover(90 + t, 128, 128);
        ImageBuffer encoded = embed_block(cover, random_message(t), CodecKey{t + 1u});
        double p = psnr(encoded, cover);
        REQUIRE(p >= 34.5);
        REQUIRE(p <= 35.5);
    }
}

TEST_CASE("embedding is deterministic") {
    ImageBuffer cover = make_cover(200, 128, 128);
    Message msg = random_message(3);
    CodecKey key{99};
    REQUIRE(embed_block(cover, msg, key) == embed_block(cover, msg, key));
}

TEST_CASE("residuals of different keys are nearly orthogonal") {
    ImageBuffer cover = make_cover(77, 128, 128);
    Message msg = random_message(8);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        ImageBuffer a = embed_block(cover, msg, CodecKey{2000ULL + 2 * t});
        ImageBuffer b = embed_block(cover, msg, CodecKey{2001ULL + 2 * t});
        double corr = std::fabs(normalized_correlation(residual(a, cover), residual(b, cover)));
        worst = std::max(worst, corr);
    }
    REQUIRE(worst < 0.2);
}

TEST_CASE("decoding unembedded noise blocks is a coin flip") {
    Message msg = random_message(4);
    double acc = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t)
        acc += bit_accuracy(binarize(decode_block(make_noise_image(3000 + t, 128, 128), CodecKey{5})), msg);
    acc /= trials;
    REQUIRE(acc > 0.45);
    REQUIRE(acc < 0.55);
}

TEST_CASE("decode of an embedded block keeps every soft value on the correct side") {
    ImageBuffer cover = make_cover(55, 128, 128);
    Message msg = random_message(55);
    ImageBuffer encoded = embed_block(cover, msg, CodecKey{55});
    SoftMessage soft = decode_block(encoded, CodecKey{55});
    for (int i = 0; i < kMessageLength; ++i) {
        if (msg[i])
            REQUIRE(soft[i] >= 0.5);
        else
            REQUIRE(soft[i] < 0.5);
    }
}

TEST_CASE("halving the residual (mean collusion with the cover) still decodes exactly") {
    for (int t = 0; t < 10; ++t) {
        ImageBuffer cover = make_cover(600 + t, 128, 128);
        Message msg = random_message(600 + t);
        CodecKey key{600ULL + t};
        ImageBuffer encoded = embed_block(cover, msg, key);
        ImageBuffer halved = collude(encoded, cover, CollusionMode::Mean);
        REQUIRE(binarize(decode_block(halved, key)) == msg);
    }
}

TEST_CASE("binarize thresholds at 0.5 with ties to 1") {
    REQUIRE(binarize({0.9, 0.1, 0.5}) == Message{1, 0, 1});
    REQUIRE(binarize(SoftMessage(4, 0.0)) == Message(4, 0));
    REQUIRE(binarize(SoftMessage(4, 1.0)) == Message(4, 1));
}

TEST_CASE("codec rejects malformed inputs") {
    ImageBuffer ok(128, 128);
    REQUIRE_THROWS_AS(embed_block(ImageBuffer(128, 120), random_message(1), CodecKey{1}), std::invalid_argument);
    REQUIRE_THROWS_AS(embed_block(ImageBuffer(100, 100), random_message(1), CodecKey{1}), std::invalid_argument);
    REQUIRE_THROWS_AS(embed_block(ok, Message{}, CodecKey{1}), std::invalid_argument);
    REQUIRE_THROWS_AS(embed_block(ok, Message{0, 2, 1}, CodecKey{1}), std::invalid_argument);
    REQUIRE_THROWS_AS(decode_block(ImageBuffer(64, 128), CodecKey{1}), std::invalid_argument);
}
