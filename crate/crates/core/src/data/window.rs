use std::collections::BTreeSet;

use super::{RawRecording, Window, N_CHANNELS};

/// Cuts non-overlapping, left-aligned windows from inside each label segment.
///
/// A window never straddles two segments; the remainder of a segment shorter
/// than `window_len` is dropped, as are unlabeled gaps.
pub fn window_recording(rec: &RawRecording, window_len: usize) -> Vec<Window> {
    assert!(window_len >= 1, "window_len must be at least 1");
    let mut out = Vec::new();
    for seg in &rec.label_segments {
        if seg.is_empty() || seg.end >= rec.samples.len() {
            continue;
        }
        let n = seg.len() / window_len;
        for k in 0..n {
            let start = seg.start + k * window_len;
            let mut data = Vec::with_capacity(window_len * N_CHANNELS);
            for row in &rec.samples[start..start + window_len] {
                data.extend_from_slice(row);
            }
            out.push(Window { data, label: seg.activity_id, subject_id: rec.user_id });
        }
    }
    out
}

/// Windows every recording whose user belongs to `subjects`.
pub fn window_dataset(recs: &[RawRecording], window_len: usize, subjects: &BTreeSet<u32>) -> Vec<Window> {
    recs.iter()
        .filter(|r| subjects.contains(&r.user_id))
        .flat_map(|r| window_recording(r, window_len))
        .collect()
}
