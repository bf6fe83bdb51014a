use chromafringe::io::{
    export_point_cloud, load_gray, load_image, load_mask, read_float_raster, save_gray, save_image, save_mask,
    write_float_raster, BitDepth,
};
use chromafringe::{DepthMap, Error, Grid, RgbImage};
use image::{ImageBuffer, Luma, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(w: usize, h: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(w, h, |_, _| std::array::from_fn(|_| rng.random::<f64>())).unwrap()
}

fn max_diff(a: &RgbImage, b: &RgbImage) -> f64 {
    (0..3)
        .flat_map(|c| a.plane(c).iter().zip(b.plane(c)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn eight_bit_png_round_trip_within_one_code() {
    let dir = tempfile::tempdir().unwrap();
    let img = random_image(17, 9, 1);
    let path = dir.path().join("a.png");
    save_image(&img, &path, BitDepth::Eight).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!(back.dims(), (17, 9));
    // round-to-nearest stays within half a code
    assert!(max_diff(&img, &back) <= 0.5 / 255.0 + 1e-12);
}

#[test]
fn sixteen_bit_png_and_ppm_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = random_image(8, 5, 2);
    let png = dir.path().join("b.png");
    save_image(&img, &png, BitDepth::Sixteen).unwrap();
    assert!(max_diff(&img, &load_image(&png).unwrap()) <= 0.5 / 65535.0 + 1e-12);
    let ppm = dir.path().join("b.ppm");
    save_image(&img, &ppm, BitDepth::Eight).unwrap();
    assert!(max_diff(&img, &load_image(&ppm).unwrap()) <= 0.5 / 255.0 + 1e-12);
}

#[test]
fn stored_codes_follow_rounding_and_clamping() {
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::from_fn(3, 1, |x, _| [[0.5, 1.2, -0.1][x]; 3]).unwrap();
    let p8 = dir.path().join("c8.png");
    save_image(&img, &p8, BitDepth::Eight).unwrap();
    let raw = image::open(&p8).unwrap().into_rgb8();
    assert_eq!(raw.get_pixel(0, 0)[0], 128);
    assert_eq!(raw.get_pixel(1, 0)[1], 255);
    assert_eq!(raw.get_pixel(2, 0)[2], 0);
    let p16 = dir.path().join("c16.png");
    save_image(&RgbImage::filled(1, 1, [1.0; 3]).unwrap(), &p16, BitDepth::Sixteen).unwrap();
    assert_eq!(image::open(&p16).unwrap().into_rgb16().get_pixel(0, 0)[0], 65535);
}

#[test]
fn externally_written_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.png");
    ImageBuffer::<Rgb<u8>, _>::new(4, 4).save(&zero).unwrap();
    let img = load_image(&zero).unwrap();
    assert_eq!(img.dims(), (4, 4));
    assert!((0..3).all(|c| img.plane(c).iter().all(|&v| v == 0.0)));

    let full = dir.path().join("full.png");
    ImageBuffer::from_pixel(2, 2, Rgb([65535u16, 0, 32768])).save(&full).unwrap();
    let img = load_image(&full).unwrap();
    assert_eq!(img.pixel(1, 1)[0], 1.0);
    assert_eq!(img.pixel(1, 1)[2], 32768.0 / 65535.0);

    let gray = dir.path().join("gray.png");
    ImageBuffer::from_pixel(3, 2, Luma([51u8])).save(&gray).unwrap();
    let g = load_gray(&gray).unwrap();
    assert!(g.data().iter().all(|&v| v == 0.2));
}

#[test]
fn gray_and_mask_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::from_fn(6, 4, |x, y| (x + y) as f64 / 8.0).unwrap();
    let path = dir.path().join("g.png");
    save_gray(&g, &path, BitDepth::Sixteen).unwrap();
    let back = load_gray(&path).unwrap();
    for (a, b) in g.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
    }
    let mask = Grid::from_fn(5, 3, |x, y| (x * y) % 2 == 0).unwrap();
    let mpath = dir.path().join("m.png");
    save_mask(&mask, &mpath).unwrap();
    assert_eq!(load_mask(&mpath).unwrap(), mask);
}

#[test]
fn load_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let missing = load_image(dir.path().join("nope.png")).unwrap_err();
    assert!(matches!(missing, Error::NotFound(_)), "{missing}");

    let text = dir.path().join("notes.png");
    std::fs::write(&text, b"this is not an image at all").unwrap();
    let unsupported = load_image(&text).unwrap_err();
    assert!(matches!(unsupported, Error::UnsupportedFormat { .. }), "{unsupported}");

    let good = dir.path().join("good.png");
    save_image(&random_image(32, 32, 3), &good, BitDepth::Eight).unwrap();
    let bytes = std::fs::read(&good).unwrap();
    let truncated = dir.path().join("truncated.png");
    std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
    let corrupt = load_image(&truncated).unwrap_err();
    assert!(matches!(corrupt, Error::Corrupt { .. }), "{corrupt}");
}

#[test]
fn unwritable_path_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let img = RgbImage::filled(2, 2, [0.5; 3]).unwrap();
    let err = save_image(&img, dir.path().join("missing/dir/x.png"), BitDepth::Eight).unwrap_err();
    assert!(matches!(err, Error::Io { .. } | Error::NotFound(_)), "{err}");
}

fn ply_vertices(path: &std::path::Path) -> (usize, Vec<String>) {
    let text = std::fs::read_to_string(path).unwrap();
    let (header, body) = text.split_once("end_header\n").unwrap();
    let declared: usize = header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .unwrap()
        .parse()
        .unwrap();
    (declared, body.lines().map(str::to_owned).collect())
}

#[test]
fn point_cloud_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ply");

    let d = DepthMap::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(export_point_cloud(&d, &path, 1).unwrap(), 4);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(
        "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
    ));
    let (n, rows) = ply_vertices(&path);
    assert_eq!((n, rows.len()), (4, 4));
    assert_eq!(rows[3], "1 1 4");

    let empty = DepthMap::from_values(3, 3, vec![f64::NAN; 9]).unwrap();
    assert_eq!(export_point_cloud(&empty, &path, 1).unwrap(), 0);
    assert_eq!(ply_vertices(&path), (0, vec![]));

    let full = DepthMap::from_fn(10, 10, |x, y| (x * y) as f64).unwrap();
    assert_eq!(export_point_cloud(&full, &path, 2).unwrap(), 25);
    let (n, rows) = ply_vertices(&path);
    assert_eq!((n, rows.len()), (25, 25));
    assert!(export_point_cloud(&full, &path, 0).is_err());
}

#[test]
fn point_cloud_skips_masked_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ply");
    let d = DepthMap::from_fn(6, 6, |x, y| if (x + y) % 3 == 0 { f64::NAN } else { 1.0 }).unwrap();
    // independent count over the stride-2 lattice
    let expect = (0..6)
        .step_by(2)
        .flat_map(|y| (0..6).step_by(2).map(move |x| (x, y)))
        .filter(|(x, y)| (x + y) % 3 != 0)
        .count();
    assert_eq!(export_point_cloud(&d, &path, 2).unwrap(), expect);
    assert_eq!(ply_vertices(&path).0, expect);
}

#[test]
fn float_raster_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.rf32");
    let values = vec![0.25, -3.5, f64::NAN, 1e6, 7.0, 0.0];
    write_float_raster(3, 2, &values, &path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 12 + 6 * 4);
    let (w, h, back) = read_float_raster(&path).unwrap();
    assert_eq!((w, h), (3, 2));
    for (a, b) in values.iter().zip(&back) {
        assert!(a.is_nan() && b.is_nan() || a == b);
    }
    assert!(write_float_raster(2, 2, &values, &path).is_err());
}

#[test]
fn float_raster_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.rf32");
    std::fs::write(&bad, b"XXXX\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
    assert!(matches!(read_float_raster(&bad).unwrap_err(), Error::UnsupportedFormat { .. }));
    std::fs::write(&bad, b"RF32\x02\x00\x00\x00\x02\x00\x00\x00\x00\x00").unwrap();
    assert!(matches!(read_float_raster(&bad).unwrap_err(), Error::Corrupt { .. }));
}
