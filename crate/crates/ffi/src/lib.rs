//! C ABI over the evaluation, chunking, hashed-embedding and vector-store code.
//!
//! Fallible calls return a [`LeafdxStatus`]; on failure the message is available
//! from [`leafdx_last_error`] on the same thread. Strings handed out by this
//! library are NUL-terminated UTF-8 and must be released with [`leafdx_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use leafdx::detect::{iou, BBox, ClassList};
use leafdx::embed::{EmbeddingProvider, HashEmbedder};
use leafdx::eval::{average_precision, evaluate_dataset, EvalOptions, ImageSizes, MatchedPrediction};
use leafdx::ingest::{split_text, ChunkSpec};
use leafdx::pipeline::ingest_into;
use leafdx::vectorstore::VectorStore;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafdxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    /// The quantity is undefined for the input (e.g. AP with no GT and no predictions).
    Undefined = 6,
    Panic = 7,
}

/// Axis-aligned box in pixel corners.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LeafdxBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

/// One ranked prediction for AP computation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LeafdxMatch {
    pub confidence: f64,
    pub is_tp: bool,
}

/// Hashed bag-of-words embedder.
pub struct LeafdxEmbedder {
    inner: HashEmbedder,
}

/// In-memory vector store.
pub struct LeafdxStore {
    inner: VectorStore,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: LeafdxStatus, msg: impl Into<String>) -> LeafdxStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`LeafdxStatus::Panic`].
fn guard(f: impl FnOnce() -> LeafdxStatus) -> LeafdxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(LeafdxStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, LeafdxStatus> {
    if p.is_null() {
        return Err(fail(LeafdxStatus::NullPointer, format!("{name} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(LeafdxStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, LeafdxStatus> {
    str_arg(p, name).map(PathBuf::from)
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> LeafdxStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            LeafdxStatus::Ok
        }
        Err(_) => fail(LeafdxStatus::Panic, "output contained a NUL byte"),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, LeafdxStatus> {
    serde_json::to_string(v).map_err(|e| fail(LeafdxStatus::Panic, e.to_string()))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message for the last failed call on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn leafdx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn leafdx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
#[no_mangle]
pub extern "C" fn leafdx_iou(a: LeafdxBox, b: LeafdxBox) -> f64 {
    let a = BBox { x1: a.x1, y1: a.y1, x2: a.x2, y2: a.y2 };
    let b = BBox { x1: b.x1, y1: b.y1, x2: b.x2, y2: b.y2 };
    iou(&a, &b)
}

/// Interpolated AP of predictions (any order) against `n_gt` ground-truth boxes.
///
/// # Safety
/// `preds` must point to `n` readable elements (it may be NULL when `n` is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leafdx_average_precision(
    preds: *const LeafdxMatch,
    n: usize,
    n_gt: usize,
    out: *mut f64,
) -> LeafdxStatus {
    guard(|| {
        if out.is_null() || (preds.is_null() && n > 0) {
            return fail(LeafdxStatus::NullPointer, "preds or out is NULL");
        }
        let slice = if n == 0 { &[][..] } else { std::slice::from_raw_parts(preds, n) };
        let matched: Vec<MatchedPrediction> = slice
            .iter()
            .map(|m| MatchedPrediction { confidence: m.confidence, is_tp: m.is_tp, class_id: 0 })
            .collect();
        match average_precision(&matched, n_gt) {
            Some(ap) => {
                *out = ap;
                LeafdxStatus::Ok
            }
            None => fail(LeafdxStatus::Undefined, "AP is undefined without ground truth or predictions"),
        }
    })
}

/// Evaluates YOLO prediction files against ground-truth files and writes the
/// report as JSON to `*out_json`.
///
/// # Safety
/// String arguments must be NUL-terminated; `sizes_csv` may be NULL (every image
/// then counts as the same size). `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leafdx_evaluate_dataset(
    pred_dir: *const c_char,
    gt_dir: *const c_char,
    classes_file: *const c_char,
    sizes_csv: *const c_char,
    conf_threshold: f64,
    iou_threshold: f64,
    out_json: *mut *mut c_char,
) -> LeafdxStatus {
    guard(|| {
        if out_json.is_null() {
            return fail(LeafdxStatus::NullPointer, "out_json is NULL");
        }
        let pred = tri!(path_arg(pred_dir, "pred_dir"));
        let gt = tri!(path_arg(gt_dir, "gt_dir"));
        let classes = tri!(path_arg(classes_file, "classes_file"));
        let classes = tri!(ClassList::from_file(&classes).map_err(|e| fail(LeafdxStatus::Parse, e.to_string())));
        let sizes = if sizes_csv.is_null() {
            ImageSizes::Uniform(1, 1)
        } else {
            let p = tri!(path_arg(sizes_csv, "sizes_csv"));
            tri!(ImageSizes::from_manifest(&p).map_err(|e| fail(LeafdxStatus::Parse, e.to_string())))
        };
        if !(0.0..=1.0).contains(&conf_threshold) || !(0.0..=1.0).contains(&iou_threshold) {
            return fail(LeafdxStatus::InvalidArgument, "thresholds must lie in [0, 1]");
        }
        let opts = EvalOptions { conf_threshold, iou_threshold, ..EvalOptions::default() };
        let report = tri!(evaluate_dataset(&pred, &gt, &classes, &sizes, &opts).map_err(|e| {
            let status = match e {
                leafdx::eval::EvalError::Io(_) => LeafdxStatus::Io,
                _ => LeafdxStatus::Parse,
            };
            fail(status, e.to_string())
        }));
        write_string(out_json, tri!(to_json(&report)))
    })
}

/// Splits `text` into overlapping chunks; writes a JSON array of
/// `{"text","start","end"}` (character offsets) to `*out_json`.
///
/// # Safety
/// `text` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn leafdx_split_text(
    text: *const c_char,
    chunk_size: usize,
    overlap: usize,
    out_json: *mut *mut c_char,
) -> LeafdxStatus {
    guard(|| {
        if out_json.is_null() {
            return fail(LeafdxStatus::NullPointer, "out_json is NULL");
        }
        let text = tri!(str_arg(text, "text"));
        let spec = tri!(ChunkSpec::new(chunk_size, overlap).map_err(|e| fail(LeafdxStatus::InvalidArgument, e.to_string())));
        let spans = tri!(split_text(text, &spec).map_err(|e| fail(LeafdxStatus::InvalidArgument, e.to_string())));
        write_string(out_json, tri!(to_json(&spans)))
    })
}

/// New hashed embedder of dimension `dim`, or NULL if `dim` is 0.
#[no_mangle]
pub extern "C" fn leafdx_embedder_new(dim: usize) -> *mut LeafdxEmbedder {
    match HashEmbedder::new(dim) {
        Ok(inner) => Box::into_raw(Box::new(LeafdxEmbedder { inner })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `e` must be NULL or a live handle from [`leafdx_embedder_new`].
#[no_mangle]
pub unsafe extern "C" fn leafdx_embedder_free(e: *mut LeafdxEmbedder) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` must be a live embedder handle.
#[no_mangle]
pub unsafe extern "C" fn leafdx_embedder_dim(e: *const LeafdxEmbedder) -> usize {
    e.as_ref().map_or(0, |e| e.inner.dim())
}

/// Embeds `text` into `out`, which must hold exactly the embedder's dimension.
///
/// # Safety
/// `e` must be a live handle, `text` NUL-terminated, `out` writable for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn leafdx_embedder_embed(
    e: *const LeafdxEmbedder,
    text: *const c_char,
    out: *mut f64,
    out_len: usize,
) -> LeafdxStatus {
    guard(|| {
        let Some(e) = e.as_ref() else {
            return fail(LeafdxStatus::NullPointer, "embedder is NULL");
        };
        let text = tri!(str_arg(text, "text"));
        if out.is_null() {
            return fail(LeafdxStatus::NullPointer, "out is NULL");
        }
        if out_len != e.inner.dim() {
            return fail(
                LeafdxStatus::DimensionMismatch,
                format!("buffer holds {out_len} values, embedder dim is {}", e.inner.dim()),
            );
        }
        let v = e.inner.embed_one(text);
        ptr::copy_nonoverlapping(v.values().as_ptr(), out, out_len);
        LeafdxStatus::Ok
    })
}

/// New empty store, or NULL if `dim` is 0.
#[no_mangle]
pub extern "C" fn leafdx_store_new(dim: usize) -> *mut LeafdxStore {
    if dim == 0 {
        set_error("dim must be positive");
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(LeafdxStore { inner: VectorStore::new(dim) }))
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be writable. On success `*out`
/// receives a handle to free with [`leafdx_store_free`].
#[no_mangle]
pub unsafe extern "C" fn leafdx_store_load(path: *const c_char, out: *mut *mut LeafdxStore) -> LeafdxStatus {
    guard(|| {
        if out.is_null() {
            return fail(LeafdxStatus::NullPointer, "out is NULL");
        }
        let path = tri!(path_arg(path, "path"));
        match VectorStore::load(&path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(LeafdxStore { inner }));
                LeafdxStatus::Ok
            }
            Err(leafdx::vectorstore::StoreError::Io(e)) => fail(LeafdxStatus::Io, e.to_string()),
            Err(e) => fail(LeafdxStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be a live store handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn leafdx_store_persist(s: *const LeafdxStore, path: *const c_char) -> LeafdxStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(LeafdxStatus::NullPointer, "store is NULL");
        };
        let path = tri!(path_arg(path, "path"));
        match s.inner.persist(&path) {
            Ok(()) => LeafdxStatus::Ok,
            Err(e) => fail(LeafdxStatus::Io, e.to_string()),
        }
    })
}

/// # Safety
/// `s` must be NULL or a live store handle.
#[no_mangle]
pub unsafe extern "C" fn leafdx_store_len(s: *const LeafdxStore) -> usize {
    s.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `s` must be NULL or a live handle from [`leafdx_store_new`] or [`leafdx_store_load`].
#[no_mangle]
pub unsafe extern "C" fn leafdx_store_free(s: *mut LeafdxStore) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Loads, chunks and embeds every `.md`/`.txt` file under `dir` into the store.
///
/// # Safety
/// Handles must be live, `dir` NUL-terminated; `chunks_added` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn leafdx_store_ingest_dir(
    s: *mut LeafdxStore,
    e: *const LeafdxEmbedder,
    dir: *const c_char,
    chunk_size: usize,
    overlap: usize,
    chunks_added: *mut usize,
) -> LeafdxStatus {
    guard(|| {
        let (Some(s), Some(e)) = (s.as_mut(), e.as_ref()) else {
            return fail(LeafdxStatus::NullPointer, "store or embedder is NULL");
        };
        let dir = tri!(path_arg(dir, "dir"));
        let spec = tri!(ChunkSpec::new(chunk_size, overlap).map_err(|e| fail(LeafdxStatus::InvalidArgument, e.to_string())));
        let result = futures::executor::block_on(ingest_into(&mut s.inner, Path::new(&dir), &spec, &e.inner));
        match result {
            Ok(summary) => {
                if !chunks_added.is_null() {
                    *chunks_added = summary.chunks_added;
                }
                LeafdxStatus::Ok
            }
            Err(leafdx::pipeline::PipelineError::Embed(err)) => fail(LeafdxStatus::DimensionMismatch, err.to_string()),
            Err(err) => fail(LeafdxStatus::Io, err.to_string()),
        }
    })
}

/// Top-k search for `query`; writes `[{"chunk":{..},"score":..}, ..]` to `*out_json`.
///
/// # Safety
/// Handles must be live, `query` NUL-terminated, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn leafdx_store_search(
    s: *const LeafdxStore,
    e: *const LeafdxEmbedder,
    query: *const c_char,
    k: usize,
    out_json: *mut *mut c_char,
) -> LeafdxStatus {
    guard(|| {
        let (Some(s), Some(e)) = (s.as_ref(), e.as_ref()) else {
            return fail(LeafdxStatus::NullPointer, "store or embedder is NULL");
        };
        if out_json.is_null() {
            return fail(LeafdxStatus::NullPointer, "out_json is NULL");
        }
        let query = tri!(str_arg(query, "query"));
        let q = e.inner.embed_one(query);
        let hits = tri!(s.inner.search(&q, k).map_err(|err| match err {
            leafdx::vectorstore::StoreError::DimensionMismatch { .. } => {
                fail(LeafdxStatus::DimensionMismatch, err.to_string())
            }
            _ => fail(LeafdxStatus::InvalidArgument, err.to_string()),
        }));
        write_string(out_json, tri!(to_json(&hits)))
    })
}
