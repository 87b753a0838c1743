//! Line-oriented text form for RoI lists and keypoints, and PGM export for
//! masks. One record per line as `name key=value ...`, floats printed with
//! the shortest round-trip form.

use super::{DetectError, Keypoint, Mask, Rect, Roi, Tag};

fn tag_name(tag: Tag) -> &'static str {
    match tag {
        Tag::Near => "near",
        Tag::Far => "far",
        Tag::TrafficLight => "traffic_light",
        Tag::Rejected => "rejected",
    }
}

fn parse_tag(s: &str) -> Result<Tag, DetectError> {
    match s {
        "near" => Ok(Tag::Near),
        "far" => Ok(Tag::Far),
        "traffic_light" => Ok(Tag::TrafficLight),
        "rejected" => Ok(Tag::Rejected),
        other => Err(DetectError::Parse(format!("unknown tag {other:?}"))),
    }
}

pub fn rois_to_text(rois: &[Roi]) -> String {
    let mut out = String::from("rois v1\n");
    out.push_str(&format!("count {}\n", rois.len()));
    for r in rois {
        out.push_str(&format!(
            "roi bbox={},{},{},{} centroid={},{} area={} fill={} tag={}\n",
            r.bbox.x0,
            r.bbox.y0,
            r.bbox.x1,
            r.bbox.y1,
            r.centroid.0,
            r.centroid.1,
            r.area,
            r.circumcircle_fill,
            tag_name(r.tag),
        ));
    }
    out
}

pub fn keypoints_to_text(keypoints: &[Keypoint]) -> String {
    let mut out = String::from("keypoints v1\n");
    out.push_str(&format!("count {}\n", keypoints.len()));
    for k in keypoints {
        let descriptor: Vec<String> = k.descriptor.iter().map(f64::to_string).collect();
        out.push_str(&format!(
            "kp x={} y={} scale={} orientation={} descriptor={}\n",
            k.position.0,
            k.position.1,
            k.scale,
            k.orientation,
            descriptor.join(","),
        ));
    }
    out
}

/// Mask as a plain-text PGM: set pixels white, clear pixels black.
pub fn mask_to_pgm(mask: &Mask, comment: &str) -> String {
    let mut out = format!("P2\n# {comment}\n{} {}\n255\n", mask.width, mask.height);
    for y in 0..mask.height {
        let row: Vec<&str> = (0..mask.width)
            .map(|x| if mask.at(x, y) { "255" } else { "0" })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

struct Records<'a> {
    lines: std::str::Lines<'a>,
}

impl<'a> Records<'a> {
    fn open(text: &'a str, header: &str) -> Result<(Self, usize), DetectError> {
        let mut lines = text.lines();
        if lines.next() != Some(header) {
            return Err(DetectError::Parse(format!("expected header {header:?}")));
        }
        let count_line = lines
            .next()
            .ok_or_else(|| DetectError::Parse("missing count line".into()))?;
        let count = count_line
            .strip_prefix("count ")
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| DetectError::Parse(format!("bad count line {count_line:?}")))?;
        Ok((Self { lines }, count))
    }

    fn record(&mut self, name: &str, keys: &[&str]) -> Result<Vec<String>, DetectError> {
        let line = self
            .lines
            .next()
            .ok_or_else(|| DetectError::Parse(format!("missing {name} record")))?;
        let mut fields = line.split(' ');
        if fields.next() != Some(name) {
            return Err(DetectError::Parse(format!("expected a {name} record in {line:?}")));
        }
        let mut values = Vec::with_capacity(keys.len());
        for key in keys {
            let field = fields
                .next()
                .ok_or_else(|| DetectError::Parse(format!("{name} record missing {key}")))?;
            let value = field
                .strip_prefix(key)
                .and_then(|f| f.strip_prefix('='))
                .ok_or_else(|| DetectError::Parse(format!("expected {key}= in {field:?}")))?;
            values.push(value.to_string());
        }
        Ok(values)
    }
}

fn parse_f64(s: &str) -> Result<f64, DetectError> {
    s.parse()
        .map_err(|_| DetectError::Parse(format!("bad float {s:?}")))
}

fn parse_usize(s: &str) -> Result<usize, DetectError> {
    s.parse()
        .map_err(|_| DetectError::Parse(format!("bad integer {s:?}")))
}

pub fn rois_from_text(text: &str) -> Result<Vec<Roi>, DetectError> {
    let (mut records, count) = Records::open(text, "rois v1")?;
    (0..count)
        .map(|_| {
            let v = records.record("roi", &["bbox", "centroid", "area", "fill", "tag"])?;
            let bbox: Vec<usize> = v[0]
                .split(',')
                .map(parse_usize)
                .collect::<Result<_, _>>()?;
            let centroid: Vec<f64> = v[1]
                .split(',')
                .map(parse_f64)
                .collect::<Result<_, _>>()?;
            if bbox.len() != 4 || centroid.len() != 2 {
                return Err(DetectError::Parse("bbox needs 4 and centroid 2 fields".into()));
            }
            Ok(Roi {
                bbox: Rect { x0: bbox[0], y0: bbox[1], x1: bbox[2], y1: bbox[3] },
                centroid: (centroid[0], centroid[1]),
                area: parse_usize(&v[2])?,
                circumcircle_fill: parse_f64(&v[3])?,
                tag: parse_tag(&v[4])?,
            })
        })
        .collect()
}

pub fn keypoints_from_text(text: &str) -> Result<Vec<Keypoint>, DetectError> {
    let (mut records, count) = Records::open(text, "keypoints v1")?;
    (0..count)
        .map(|_| {
            let v = records.record("kp", &["x", "y", "scale", "orientation", "descriptor"])?;
            let descriptor = if v[4].is_empty() {
                Vec::new()
            } else {
                v[4].split(',').map(parse_f64).collect::<Result<_, _>>()?
            };
            Ok(Keypoint {
                position: (parse_f64(&v[0])?, parse_f64(&v[1])?),
                scale: parse_f64(&v[2])?,
                orientation: parse_f64(&v[3])?,
                descriptor,
            })
        })
        .collect()
}
