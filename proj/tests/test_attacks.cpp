#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "dwmark/attacks.hpp"
#include "support/synthetic.hpp"

using namespace dwmark;
using dwmark::testsupport::make_cover;
using dwmark::testsupport::make_noise_image;

TEST_CASE("sampled parameters stay inside the published ranges") {
    for (int t = 0; t < 1000; ++t) {
        auto resize = sample_attack(AttackKind::Resize, t);
        REQUIRE(resize.param("r1") > 0.5);
        REQUIRE(resize.param("r1") < 2.0);
        REQUIRE(resize.param("r2") > 0.5);
        REQUIRE(resize.param("r2") < 2.0);

        auto cropa = sample_attack(AttackKind::Crop, t);
        REQUIRE(cropa.param("c1") > 0.7);
        REQUIRE(cropa.param("c1") < 1.0);

        auto rot = sample_attack(AttackKind::Rotate, t);
        REQUIRE(std::fabs(rot.param("angle")) < 30.0);

        auto pad = sample_attack(AttackKind::Padding, t);
        for (const char* k : {"p_up", "p_bottom", "p_left", "p_right"}) {
            REQUIRE(pad.param(k) > 0.0);
            REQUIRE(pad.param(k) < 100.0);
        }

        auto pip = sample_attack(AttackKind::Pip, t);
        REQUIRE(pip.param("e1") > 1.0);
        REQUIRE(pip.param("e1") < 2.0);

        auto jp = sample_attack(AttackKind::Jpeg, t);
        REQUIRE(jp.param("quality") >= 50.0);
        REQUIRE(jp.param("quality") <= 100.0);
        REQUIRE(jp.param("quality") == std::floor(jp.param("quality")));

        auto gn = sample_attack(AttackKind::GaussianNoise, t);
        REQUIRE(gn.param("variance") >= 3.0);
        REQUIRE(gn.param("variance") <= 10.0);

        auto gf = sample_attack(AttackKind::GaussianFilter, t);
        REQUIRE((gf.param("ksize") == 3 || gf.param("ksize") == 5 || gf.param("ksize") == 7));

        auto col = sample_attack(AttackKind::Color, t);
        REQUIRE(col.param("factor") > 0.5);
        REQUIRE(col.param("factor") < 1.5);

        auto drop = sample_attack(AttackKind::Dropout, t);
        REQUIRE(drop.param("percent") >= 0.0);
        REQUIRE(drop.param("percent") < 30.0);

        auto occ = sample_attack(AttackKind::Occlusion, t);
        REQUIRE(occ.param("o1") > 0.25);
        REQUIRE(occ.param("o1") < 0.5);
    }
}

TEST_CASE("sampling is deterministic per (kind, seed)") {
    for (auto kind : {AttackKind::Resize, AttackKind::Rotate, AttackKind::Jpeg}) {
        auto a = sample_attack(kind, 1234);
        auto b = sample_attack(kind, 1234);
        REQUIRE(a.params == b.params);
    }
    REQUIRE(sample_attack(AttackKind::Rotate, 1).params != sample_attack(AttackKind::Rotate, 2).params);
    REQUIRE_THROWS_AS(sample_attack(AttackKind::CollusionMean, 1), std::invalid_argument);
}

TEST_CASE("geometric attacks produce the specified output dimensions") {
    ImageBuffer img = make_cover(1, 1000, 800);

    AttackSpec resize{AttackKind::Resize, {{"r1", 0.5}, {"r2", 2.0}}, 0};
    ImageBuffer r = apply_attack(img, resize);
    REQUIRE(r.height == 500);
    REQUIRE(r.width == 1600);

    AttackSpec cr{AttackKind::Crop, {{"c1", 0.7}, {"c2", 0.7}}, 3};
    ImageBuffer c = apply_attack(img, cr);
    REQUIRE(c.height == 700);
    REQUIRE(c.width == 560);

    AttackSpec pad{AttackKind::Padding, {{"p_up", 5}, {"p_bottom", 7}, {"p_left", 11}, {"p_right", 13}}, 0};
    ImageBuffer p = apply_attack(img, pad);
    REQUIRE(p.height == 1012);
    REQUIRE(p.width == 824);

    ImageBuffer donor = make_cover(2, 600, 600);
    AttackSpec pip{AttackKind::Pip, {{"e1", 1.5}, {"e2", 1.25}}, 4};
    ImageBuffer q = apply_attack(img, pip, nullptr, &donor);
    REQUIRE(q.height == 1500);
    REQUIRE(q.width == 1000);

    AttackSpec rot{AttackKind::Rotate, {{"angle", 30.0}}, 0};
    ImageBuffer rr = apply_attack(img, rot);
    int eh, ew;
    rotated_canvas(1000, 800, 30.0, eh, ew);
    REQUIRE(rr.height == eh);
    REQUIRE(rr.width == ew);

    // non-geometric attacks preserve dimensions
    ImageBuffer small = make_cover(3, 256, 256);
    for (auto kind : {AttackKind::Jpeg, AttackKind::GaussianNoise, AttackKind::GaussianFilter, AttackKind::Color}) {
        AttackSpec spec = sample_attack(kind, 5);
        ImageBuffer out = apply_attack(small, spec, &small, &small);
        REQUIRE(out.height == 256);
        REQUIRE(out.width == 256);
    }
}

TEST_CASE("rotate by zero is the identity") {
    ImageBuffer img = make_cover(4, 120, 140);
    AttackSpec rot{AttackKind::Rotate, {{"angle", 0.0}}, 0};
    REQUIRE(apply_attack(img, rot) == img);
}

TEST_CASE("dropout replaces exactly the floor count of pixels") {
    ImageBuffer wm(100, 100, 200);
    ImageBuffer cover(100, 100, 100);
    AttackSpec spec{AttackKind::Dropout, {{"percent", 10.0}}, 7};
    ImageBuffer out = apply_attack(wm, spec, &cover);
    int replaced = 0;
    for (std::size_t p = 0; p < out.pixel_count(); ++p) {
        bool is_cover = out.pixels[p * 3] == 100;
        bool is_wm = out.pixels[p * 3] == 200;
        REQUIRE((is_cover || is_wm));
        replaced += is_cover;
    }
    REQUIRE(replaced == 1000);  // floor(10% of 100*100)

    AttackSpec zero{AttackKind::Dropout, {{"percent", 0.0}}, 7};
    REQUIRE(apply_attack(wm, zero, &cover) == wm);
    REQUIRE_THROWS_AS(apply_attack(wm, spec, nullptr), std::invalid_argument);
}

TEST_CASE("occlusion and pip demand a donor") {
    ImageBuffer img = make_cover(5, 256, 256);
    AttackSpec occ = sample_attack(AttackKind::Occlusion, 1);
    REQUIRE_THROWS_AS(apply_attack(img, occ), std::invalid_argument);
    AttackSpec pip = sample_attack(AttackKind::Pip, 1);
    REQUIRE_THROWS_AS(apply_attack(img, pip), std::invalid_argument);
}

TEST_CASE("attacks are byte-identical on replay") {
    ImageBuffer img = make_cover(6, 300, 300);
    ImageBuffer donor = make_cover(7, 300, 300);
    for (auto kind : {AttackKind::Resize, AttackKind::Crop, AttackKind::Rotate, AttackKind::Padding,
                      AttackKind::Pip, AttackKind::Jpeg, AttackKind::GaussianNoise, AttackKind::GaussianFilter,
                      AttackKind::Color, AttackKind::Dropout, AttackKind::Occlusion}) {
        AttackSpec spec = sample_attack(kind, 99);
        ImageBuffer a = apply_attack(img, spec, &img, &donor);
        ImageBuffer b = apply_attack(img, spec, &img, &donor);
        REQUIRE(a == b);
    }
}

TEST_CASE("collusion order statistics") {
    ImageBuffer a(8, 8, 100);
    ImageBuffer b(8, 8, 200);
    REQUIRE(collude(a, b, CollusionMode::Mean).pixels[0] == 150);
    REQUIRE(collude(a, b, CollusionMode::Min).pixels[0] == 100);
    REQUIRE(collude(a, b, CollusionMode::Max).pixels[0] == 200);

    ImageBuffer x = make_noise_image(1, 64, 64);
    ImageBuffer y = make_noise_image(2, 64, 64);
    for (auto mode : {CollusionMode::Min, CollusionMode::Max, CollusionMode::Mean})
        REQUIRE(collude(x, x, mode) == x);

    ImageBuffer lo = collude(x, y, CollusionMode::Min);
    ImageBuffer mid = collude(x, y, CollusionMode::Mean);
    ImageBuffer hi = collude(x, y, CollusionMode::Max);
    for (std::size_t i = 0; i < lo.pixels.size(); ++i) {
        REQUIRE(lo.pixels[i] <= mid.pixels[i]);
        REQUIRE(mid.pixels[i] <= hi.pixels[i]);
    }
    REQUIRE_THROWS_AS(collude(x, ImageBuffer(32, 32), CollusionMode::Min), std::invalid_argument);
}

TEST_CASE("mean collusion rounds half up") {
    ImageBuffer a(1, 1, 100);
    ImageBuffer b(1, 1, 101);
    REQUIRE(collude(a, b, CollusionMode::Mean).pixels[0] == 101);
}

TEST_CASE("combined attacks apply left to right") {
    ImageBuffer img = make_cover(8, 1000, 1000);
    AttackChain idid{AttackSpec{}, AttackSpec{}};
    REQUIRE(apply_combined(img, idid) == img);

    AttackChain chain;
    chain.push_back(AttackSpec{AttackKind::Crop, {{"c1", 0.8}, {"c2", 0.8}}, 1});
    chain.push_back(AttackSpec{AttackKind::Jpeg, {{"quality", 75}}, 2});
    ImageBuffer out = apply_combined(img, chain);
    REQUIRE(out.height == 800);
    REQUIRE(out.width == 800);
    REQUIRE(apply_combined(img, chain) == out);
    REQUIRE_THROWS_AS(apply_combined(img, AttackChain{}), std::invalid_argument);
}

TEST_CASE("attack specs survive json and string round trips") {
    AttackSpec spec = sample_attack(AttackKind::Resize, 321);
    AttackSpec back = attack_from_json(attack_to_json(spec));
    REQUIRE(back.kind == spec.kind);
    REQUIRE(back.seed == spec.seed);
    REQUIRE(back.params == spec.params);

    AttackChain chain = parse_attack_string("crop+resize+jpeg:seed=5");
    REQUIRE(chain.size() == 3);
    REQUIRE(chain[0].kind == AttackKind::Crop);
    REQUIRE(chain[1].kind == AttackKind::Resize);
    REQUIRE(chain[2].kind == AttackKind::Jpeg);
    AttackChain again = parse_attack_string("crop+resize+jpeg:seed=5");
    for (std::size_t i = 0; i < chain.size(); ++i) REQUIRE(chain[i].params == again[i].params);

    AttackChain fromjson = chain_from_json(chain_to_json(chain));
    REQUIRE(fromjson.size() == chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) REQUIRE(fromjson[i].params == chain[i].params);

    REQUIRE_THROWS_AS(parse_attack_string("sharpen"), std::invalid_argument);
    REQUIRE_THROWS_AS(attack_kind_from_name("nope"), std::invalid_argument);
}

TEST_CASE("mask transforms track the image geometry") {
    MaskBuffer mask(200, 200);
    for (int y = 40; y < 90; ++y)
        for (int x = 60; x < 110; ++x) mask.at(y, x) = 1;

    AttackSpec resize{AttackKind::Resize, {{"r1", 0.5}, {"r2", 0.5}}, 0};
    MaskBuffer mr = apply_attack_mask(mask, resize);
    REQUIRE(mr.height == 100);
    REQUIRE(mr.width == 100);
    REQUIRE(mr.count_set() > 0);

    AttackSpec occ{AttackKind::Occlusion, {{"o1", 0.5}, {"o2", 0.5}}, 11};
    MaskBuffer mo = apply_attack_mask(mask, occ);
    REQUIRE(mo.count_set() <= mask.count_set());

    AttackSpec jp{AttackKind::Jpeg, {{"quality", 80}}, 0};
    REQUIRE(apply_attack_mask(mask, jp) == mask);

    AttackSpec pad{AttackKind::Padding, {{"p_up", 10}, {"p_bottom", 10}, {"p_left", 10}, {"p_right", 10}}, 0};
    MaskBuffer mp = apply_attack_mask(mask, pad);
    REQUIRE(mp.height == 220);
    REQUIRE(mp.at(50, 70) == 1);  // shifted by the padding offset
}
