//! C ABI over the `eegret` library.
//!
//! Every function returns a status code (`EEGRET_OK` or one of the
//! `EEGRET_ERR_*` values) and writes results through out-pointers. On failure
//! `eegret_last_error()` returns a message for the calling thread, valid until
//! that thread's next call. Handles are opaque and must be released with the
//! matching `*_free` function.
//!
//! Images cross the boundary as row-major `height × width × 3` doubles in
//! `[0, 1]`; feature matrices as row-major `rows × dim`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use eegret::metrics::{correlation_distance, pixcorr, ssim, two_way_identification};
use eegret::nn::{eeg_forward, visual_forward, EncoderParams, ForwardMode};
use eegret::preproc::Image;
use eegret::retrieval::{cosine_matrix, hungarian_assign, hungarian_top_k, top_k_accuracy, SimilarityMatrix};
use eegret::Error;

pub const EEGRET_OK: i32 = 0;
pub const EEGRET_ERR_FORMAT: i32 = 1;
pub const EEGRET_ERR_INTEGRITY: i32 = 2;
pub const EEGRET_ERR_DATA: i32 = 3;
pub const EEGRET_ERR_CONFIG: i32 = 4;
pub const EEGRET_ERR_PARAMETER: i32 = 5;
pub const EEGRET_ERR_SHAPE: i32 = 6;
pub const EEGRET_ERR_MODE: i32 = 7;
pub const EEGRET_ERR_LOOKUP: i32 = 8;
pub const EEGRET_ERR_IO: i32 = 9;
/// A required pointer argument was null, or a string was not UTF-8.
pub const EEGRET_ERR_ARGUMENT: i32 = 10;
/// The library panicked; this is a bug.
pub const EEGRET_ERR_INTERNAL: i32 = 11;

/// Trained encoder parameters loaded from a checkpoint.
pub struct EegretEncoder {
    params: EncoderParams<f32>,
}

/// Query × candidate score matrix.
pub struct EegretSimilarity {
    inner: SimilarityMatrix,
}

/// Encoder dimensions, as stored in the checkpoint.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EegretDims {
    pub channels: usize,
    pub timepoints: usize,
    pub embed: usize,
    pub feature_dim: usize,
    pub blur_levels: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

enum Fail {
    Lib(Error),
    Argument(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EEGRET_OK,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            e.code()
        }
        Ok(Err(Fail::Argument(m))) => {
            set_error(m);
            EEGRET_ERR_ARGUMENT
        }
        Err(_) => {
            set_error("internal panic".into());
            EEGRET_ERR_INTERNAL
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail::Argument(format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to `len` readable values.
unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    non_null(p, what)?;
    Ok(slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or point to `len` writable values.
unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    non_null(p, what)?;
    Ok(slice::from_raw_parts_mut(p, len))
}

fn checked_len(parts: &[usize]) -> Result<usize, Fail> {
    parts
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| Fail::Argument("array size overflows".into()))
}

/// Message describing the calling thread's most recent failure, or null.
#[no_mangle]
pub extern "C" fn eegret_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eegret_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an encoder checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_encoder_load(path: *const c_char, out: *mut *mut EegretEncoder) -> i32 {
    guard(|| {
        non_null(path, "path")?;
        non_null(out, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail::Argument("path is not UTF-8".into()))?;
        let params = EncoderParams::<f32>::load_checkpoint(Path::new(path))?;
        *out = Box::into_raw(Box::new(EegretEncoder { params }));
        Ok(())
    })
}

/// # Safety
/// `enc` must be null or a handle from `eegret_encoder_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn eegret_encoder_free(enc: *mut EegretEncoder) {
    if !enc.is_null() {
        drop(Box::from_raw(enc));
    }
}

/// # Safety
/// `enc` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_encoder_dims(enc: *const EegretEncoder, out: *mut EegretDims) -> i32 {
    guard(|| {
        non_null(enc, "encoder")?;
        non_null(out, "out")?;
        let d = (*enc).params.dims();
        *out = EegretDims {
            channels: d.channels,
            timepoints: d.timepoints,
            embed: d.embed,
            feature_dim: d.feature_dim,
            blur_levels: d.blur_levels,
        };
        Ok(())
    })
}

/// Eval-mode EEG embeddings. `eeg` holds `n × channels × timepoints`
/// (repetitions already averaged); `out` receives `n × embed`.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn eegret_embed_eeg(
    enc: *const EegretEncoder,
    eeg: *const f32,
    n: usize,
    out: *mut f32,
) -> i32 {
    guard(|| {
        non_null(enc, "encoder")?;
        let p = &(*enc).params;
        let d = *p.dims();
        let x = input(eeg, checked_len(&[n, d.channels, d.timepoints])?, "eeg")?;
        let out = output(out, checked_len(&[n, d.embed])?, "out")?;
        if n == 0 {
            return Ok(());
        }
        let (z, _) = eeg_forward(p, x, &ForwardMode::eval())?;
        out.copy_from_slice(&z);
        Ok(())
    })
}

/// Eval-mode visual embeddings. `blur` holds `n × blur_levels × feature_dim`;
/// `evnet` is null for blur-only encoders, else `n × feature_dim`.
///
/// # Safety
/// Buffers must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn eegret_embed_visual(
    enc: *const EegretEncoder,
    blur: *const f32,
    evnet: *const f32,
    n: usize,
    out: *mut f32,
) -> i32 {
    guard(|| {
        non_null(enc, "encoder")?;
        let p = &(*enc).params;
        let d = *p.dims();
        let b = input(blur, checked_len(&[n, d.blur_levels, d.feature_dim])?, "blur")?;
        let e = if evnet.is_null() {
            None
        } else {
            Some(input(evnet, checked_len(&[n, d.feature_dim])?, "evnet")?)
        };
        let out = output(out, checked_len(&[n, d.embed])?, "out")?;
        if n == 0 {
            return Ok(());
        }
        let (v, _) = visual_forward(p, b, e, &ForwardMode::eval())?;
        out.copy_from_slice(&v);
        Ok(())
    })
}

/// Cosine similarity of `rows × dim` queries against `cols × dim` candidates.
/// Query `i`'s true candidate is `i` unless labels are set.
///
/// # Safety
/// Buffers must hold the stated number of elements; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_similarity_cosine(
    queries: *const f32,
    rows: usize,
    candidates: *const f32,
    cols: usize,
    dim: usize,
    out: *mut *mut EegretSimilarity,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let q = input(queries, checked_len(&[rows, dim])?, "queries")?;
        let c = input(candidates, checked_len(&[cols, dim])?, "candidates")?;
        let inner = cosine_matrix(q, c, dim)?;
        *out = Box::into_raw(Box::new(EegretSimilarity { inner }));
        Ok(())
    })
}

/// Wraps a precomputed row-major `rows × cols` score matrix.
///
/// # Safety
/// `scores` must hold `rows * cols` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_similarity_from_scores(
    scores: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut EegretSimilarity,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let s = input(scores, checked_len(&[rows, cols])?, "scores")?;
        let inner = SimilarityMatrix::new(rows, cols, s.to_vec())?;
        *out = Box::into_raw(Box::new(EegretSimilarity { inner }));
        Ok(())
    })
}

/// Sets class labels: query `i` is a hit on candidate `j` when
/// `query_labels[i] == candidate_labels[j]`.
///
/// # Safety
/// `sim` must be a live handle; label arrays must hold `rows` / `cols` values.
#[no_mangle]
pub unsafe extern "C" fn eegret_similarity_set_labels(
    sim: *mut EegretSimilarity,
    query_labels: *const usize,
    candidate_labels: *const usize,
) -> i32 {
    guard(|| {
        non_null(sim, "similarity")?;
        let s = &mut *sim;
        let q = input(query_labels, s.inner.rows(), "query_labels")?.to_vec();
        let c = input(candidate_labels, s.inner.cols(), "candidate_labels")?.to_vec();
        s.inner = s.inner.clone().with_labels(q, c)?;
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a live handle, freed once.
#[no_mangle]
pub unsafe extern "C" fn eegret_similarity_free(sim: *mut EegretSimilarity) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Fraction of queries whose true candidate ranks within the top `k`
/// (ties broken towards the lower index).
///
/// # Safety
/// `sim` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_top_k_accuracy(sim: *const EegretSimilarity, k: usize, out: *mut f64) -> i32 {
    guard(|| {
        non_null(sim, "similarity")?;
        non_null(out, "out")?;
        *out = top_k_accuracy(&(*sim).inner, k)?;
        Ok(())
    })
}

/// Maximum-score one-to-one assignment of a square matrix. `permutation`
/// receives `rows` candidate indices; `total` (nullable) the summed score.
///
/// # Safety
/// `sim` must be a live handle; `permutation` must hold `rows` values.
#[no_mangle]
pub unsafe extern "C" fn eegret_hungarian_assign(
    sim: *const EegretSimilarity,
    permutation: *mut usize,
    total: *mut f64,
) -> i32 {
    guard(|| {
        non_null(sim, "similarity")?;
        let a = hungarian_assign(&(*sim).inner)?;
        output(permutation, a.permutation.len(), "permutation")?.copy_from_slice(&a.permutation);
        if !total.is_null() {
            *total = a.total_score;
        }
        Ok(())
    })
}

/// Top-k accuracy under `k` successive disjoint one-to-one assignments.
///
/// # Safety
/// `sim` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_hungarian_top_k(sim: *const EegretSimilarity, k: usize, out: *mut f64) -> i32 {
    guard(|| {
        non_null(sim, "similarity")?;
        non_null(out, "out")?;
        *out = hungarian_top_k(&(*sim).inner, k)?;
        Ok(())
    })
}

unsafe fn image(p: *const f64, height: usize, width: usize, what: &str) -> Result<Image, Fail> {
    let px = input(p, checked_len(&[height, width, 3])?, what)?;
    Ok(Image::new(height, width, px.to_vec())?)
}

/// Mean SSIM of two equally sized RGB images (luminance, Gaussian 11/1.5).
///
/// # Safety
/// Both images must hold `height * width * 3` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_ssim(
    a: *const f64,
    b: *const f64,
    height: usize,
    width: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = ssim(&image(a, height, width, "a")?, &image(b, height, width, "b")?)?;
        Ok(())
    })
}

/// Pixel correlation after resizing both images to 256 × 256.
///
/// # Safety
/// Each image must hold `h * w * 3` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_pixcorr(
    a: *const f64,
    a_height: usize,
    a_width: usize,
    b: *const f64,
    b_height: usize,
    b_width: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        *out = pixcorr(&image(a, a_height, a_width, "a")?, &image(b, b_height, b_width, "b")?)?;
        Ok(())
    })
}

/// Two-way identification over aligned `n × dim` feature rows.
///
/// # Safety
/// Both matrices must hold `n * dim` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_two_way_identification(
    gen: *const f64,
    gt: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let len = checked_len(&[n, dim])?;
        *out = two_way_identification(input(gen, len, "gen")?, input(gt, len, "gt")?, dim)?;
        Ok(())
    })
}

/// Mean `1 − r` between aligned `n × dim` feature rows.
///
/// # Safety
/// Both matrices must hold `n * dim` values; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eegret_correlation_distance(
    gen: *const f64,
    gt: *const f64,
    n: usize,
    dim: usize,
    out: *mut f64,
) -> i32 {
    guard(|| {
        non_null(out, "out")?;
        let len = checked_len(&[n, dim])?;
        *out = correlation_distance(input(gen, len, "gen")?, input(gt, len, "gt")?, dim)?;
        Ok(())
    })
}
