//! Midpoint gap-fill between adjacent organic results.

use crate::error::{Error, Result};
use crate::model::{AoiSource, Etype, Flavor, TypedAoi};

/// Fails when two main-axis AOIs share a row.
pub fn check_main_axis_disjoint(aois: &[TypedAoi]) -> Result<()> {
    let mut main: Vec<&TypedAoi> = aois.iter().filter(|a| a.is_main_axis()).collect();
    main.sort_by_key(|a| (a.y0(), a.y1()));
    for pair in main.windows(2) {
        if pair[1].y0() < pair[0].y1() {
            return Err(Error::OverlappingAois { a: pair[0].aoi_id.clone(), b: pair[1].aoi_id.clone() });
        }
    }
    Ok(())
}

/// Extends each pair of vertically adjacent organics to their shared
/// midpoint `floor((upper.y1 + lower.y0) / 2)`.
///
/// A pair is adjacent when no other main-axis AOI sits between them and no
/// other box occupies the gap. Non-organic boxes, x-extents, etypes and
/// positions pass through unchanged. The output is the `typed_gapfill`
/// flavor in input order.
pub fn gapfill(aois: &[TypedAoi]) -> Result<Vec<TypedAoi>> {
    if let Some(bad) = aois.iter().find(|a| a.flavor == Flavor::OrganicHybrid) {
        return Err(Error::WrongFlavor { expected: "typed", got: bad.flavor.as_str() });
    }
    check_main_axis_disjoint(aois)?;

    let mut order: Vec<usize> = (0..aois.len()).filter(|&i| aois[i].is_main_axis()).collect();
    order.sort_by_key(|&i| (aois[i].y0(), aois[i].y1()));

    let mut out = aois.to_vec();
    for pair in order.windows(2) {
        let (ia, ib) = (pair[0], pair[1]);
        let (a, b) = (&aois[ia], &aois[ib]);
        if a.etype != Etype::Organic || b.etype != Etype::Organic {
            continue;
        }
        let (gap0, gap1) = (a.y1(), b.y0());
        let blocked = aois.iter().enumerate().any(|(k, o)| {
            k != ia && k != ib && o.y0() < gap1 && o.y1() > gap0 && o.x < (a.x + a.w).max(b.x + b.w) && o.x + o.w > a.x.min(b.x)
        });
        if blocked {
            continue;
        }
        let mid = (gap0 + gap1).div_euclid(2);
        if mid != gap0 {
            let up = &mut out[ia];
            up.h = mid - up.y;
            up.source = AoiSource::GapfillExtension;
        }
        if mid != gap1 {
            let low = &mut out[ib];
            low.h = low.y + low.h - mid;
            low.y = mid;
            low.source = AoiSource::GapfillExtension;
        }
    }
    for a in out.iter_mut() {
        a.flavor = Flavor::TypedGapfill;
    }
    Ok(out)
}
