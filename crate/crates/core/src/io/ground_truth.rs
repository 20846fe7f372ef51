use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rle::{decode_bitmap, decode_rle, encode_rle, MaskCodecError};
use super::{malformed, Diagnostic, DiagnosticKind, ValidationReport};
use crate::ground_truth::{GroundTruthFrame, GroundTruthObject, SegmentMask};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    #[serde(default)]
    sequence: String,
    width: u32,
    height: u32,
    #[serde(default)]
    objects: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    class: String,
    instance_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bitmap: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pixel_count: Option<u64>,
}

/// Decoded annotations, ordered by frame index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthDocument {
    pub class_list: Vec<String>,
    pub frames: Vec<GroundTruthFrame>,
}

impl GroundTruthDocument {
    pub fn frame(&self, index: u64) -> Option<&GroundTruthFrame> {
        self.frames.binary_search_by_key(&index, |f| f.frame_index).ok().map(|i| &self.frames[i])
    }
}

/// Parses and validates ground truth, collecting every violation.
///
/// Expected shape:
/// `{"frames": {"<index>": {"sequence", "width", "height", "objects": [{"class", "instance_id", "rle" | "bitmap", "pixel_count"?}]}}}`.
pub fn parse_ground_truth(bytes: &[u8], class_list: &[String]) -> Result<GroundTruthDocument, ValidationReport> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| malformed(format!("not valid JSON: {e}")))?;
    let frames = root
        .as_object()
        .and_then(|o| o.get("frames"))
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("expected an object with a `frames` object"))?;
    let classes: BTreeMap<&str, usize> = class_list.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut report = ValidationReport::default();
    let mut out = Vec::with_capacity(frames.len());
    for (key, raw) in frames {
        let diag = |kind, record, msg: String| Diagnostic::new(kind, Some(key), record, msg);
        let Ok(frame_index) = key.parse::<u64>() else {
            report.push(diag(DiagnosticKind::MalformedSyntax, None, "frame key is not a non-negative integer".into()));
            continue;
        };
        let frame = match FrameRecord::deserialize(raw) {
            Ok(f) => f,
            Err(e) => {
                report.push(diag(DiagnosticKind::MalformedSyntax, None, e.to_string()));
                continue;
            }
        };
        let (w, h) = (frame.width as usize, frame.height as usize);
        let mut objects = Vec::with_capacity(frame.objects.len());
        for (i, raw) in frame.objects.iter().enumerate() {
            let rec = match ObjectRecord::deserialize(raw) {
                Ok(r) => r,
                Err(e) => {
                    report.push(diag(DiagnosticKind::MalformedSyntax, Some(i), e.to_string()));
                    continue;
                }
            };
            let class_id = classes.get(rec.class.as_str()).copied();
            if class_id.is_none() {
                report.push(diag(DiagnosticKind::UnknownClass, Some(i), format!("class `{}` is not in the class list", rec.class)));
            }
            let bits = match (&rec.rle, &rec.bitmap) {
                (Some(text), None) => decode_rle(text, w * h),
                (None, Some(text)) => decode_bitmap(text, w * h),
                _ => {
                    report.push(diag(DiagnosticKind::MalformedSyntax, Some(i), "exactly one of `rle` and `bitmap` is required".into()));
                    continue;
                }
            };
            let bits = match bits {
                Ok(b) => b,
                Err(e @ MaskCodecError::LengthMismatch { .. }) => {
                    report.push(diag(DiagnosticKind::RleLengthMismatch, Some(i), e.to_string()));
                    continue;
                }
                Err(e) => {
                    report.push(diag(DiagnosticKind::MalformedSyntax, Some(i), e.to_string()));
                    continue;
                }
            };
            let mask = SegmentMask::from_bits((0, 0), w, h, &bits).expect("decoded length matches image");
            if let Some(declared) = rec.pixel_count.filter(|n| *n != mask.pixel_count()) {
                report.push(diag(
                    DiagnosticKind::PixelCountMismatch,
                    Some(i),
                    format!("declared {declared} pixels, mask has {}", mask.pixel_count()),
                ));
            }
            match (class_id, GroundTruthObject::new(class_id.unwrap_or(0), rec.instance_id, mask, frame_index)) {
                (Some(_), Ok(obj)) => objects.push(obj),
                (_, Err(_)) => report.push(diag(DiagnosticKind::EmptyMask, Some(i), "mask has no set pixels".into())),
                (None, Ok(_)) => {}
            }
        }
        out.push(GroundTruthFrame { frame_index, sequence: frame.sequence, width: frame.width, height: frame.height, objects });
    }
    out.sort_by_key(|f| f.frame_index);
    report.into_result(GroundTruthDocument { class_list: class_list.to_vec(), frames: out })
}

/// Sorted distinct class names used in a ground-truth file, for when no
/// class list is supplied.
pub fn ground_truth_class_names(bytes: &[u8]) -> Result<Vec<String>, ValidationReport> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| malformed(format!("not valid JSON: {e}")))?;
    let frames = root
        .get("frames")
        .and_then(Value::as_object)
        .ok_or_else(|| malformed("expected an object with a `frames` object"))?;
    let names: std::collections::BTreeSet<String> = frames
        .values()
        .filter_map(|f| f.get("objects").and_then(Value::as_array))
        .flatten()
        .filter_map(|o| o.get("class").and_then(Value::as_str).map(str::to_string))
        .collect();
    Ok(names.into_iter().collect())
}

/// Writes frames in the RLE form accepted by [`parse_ground_truth`].
pub fn serialize_ground_truth(frames: &[GroundTruthFrame], class_list: &[String]) -> String {
    let mut out = serde_json::Map::new();
    for f in frames {
        let image = f.image_rect();
        let objects: Vec<Value> = f
            .objects
            .iter()
            .map(|o| {
                let seg = o.segment();
                let bits = (image.y_min..=image.y_max).flat_map(|y| (image.x_min..=image.x_max).map(move |x| seg.contains(x, y)));
                let rec = ObjectRecord {
                    class: class_list[o.class_id].clone(),
                    instance_id: o.instance_id,
                    rle: Some(encode_rle(bits)),
                    bitmap: None,
                    pixel_count: Some(o.pixel_count()),
                };
                serde_json::to_value(rec).expect("object serializes")
            })
            .collect();
        let frame = serde_json::json!({
            "sequence": f.sequence,
            "width": f.width,
            "height": f.height,
            "objects": objects,
        });
        out.insert(f.frame_index.to_string(), frame);
    }
    serde_json::to_string_pretty(&serde_json::json!({ "frames": out })).expect("ground truth serializes")
}
