//! HTML card extraction and the eight-tier label chain.
//!
//! Cards are read from the saved page in document order. Each card is then
//! labeled by the first tier that fires:
//!
//! 1. widget heading text table
//! 2. ad class signatures
//! 3. knowledge-panel class signatures
//! 4. `data-attrid` prefix table
//! 5. organic structure (`h3` plus `cite`)
//! 6. unmatched widget heading
//! 7. footer / navigation signatures
//! 8. default
//!
//! All signal tables come from [`Rules`].

use std::collections::{BTreeSet, HashSet};

use scraper::node::Node;
use scraper::{ElementRef, Html};
use ego_tree::{NodeId, NodeRef};
use serde::{Deserialize, Serialize};

use crate::model::Etype;
use crate::rules::Rules;

/// Depth below the card root whose class tokens count as card signals.
const CLASS_TOKEN_DEPTH: usize = 2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocCard {
    pub doc_index: usize,
    pub heading_text: String,
    pub class_tokens: BTreeSet<String>,
    pub data_attrid: String,
    pub has_cite: bool,
    pub has_h3: bool,
    pub anchor_count: usize,
    pub snippet_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtypeLabel {
    pub etype: Etype,
    /// Which chain tier fired, 1..=8.
    pub tier: u8,
    pub doc_index: usize,
}

fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn element_text(el: ElementRef<'_>) -> String {
    collapse_ws(&el.text().collect::<String>())
}

fn is_heading(el: &ElementRef<'_>) -> bool {
    let v = el.value();
    v.name() == "h2" || v.attr("role") == Some("heading")
}

fn visit(node: NodeRef<'_, Node>, depth: usize, card: &mut DocCard, roots: &HashSet<NodeId>, rules: &Rules) {
    let Some(el) = ElementRef::wrap(node) else { return };
    let v = el.value();
    if depth <= CLASS_TOKEN_DEPTH {
        card.class_tokens.extend(v.classes().map(str::to_string));
    }
    match v.name() {
        "h3" => card.has_h3 = true,
        "cite" => card.has_cite = true,
        "a" => card.anchor_count += 1,
        _ => {}
    }
    if card.heading_text.is_empty() && is_heading(&el) {
        card.heading_text = element_text(el);
    }
    if card.data_attrid.is_empty() {
        if let Some(a) = v.attr("data-attrid") {
            card.data_attrid = a.to_string();
        }
    }
    if card.snippet_text.is_empty() && v.classes().any(|c| rules.cards.snippet_classes.iter().any(|s| s == c)) {
        card.snippet_text = element_text(el);
    }
    for child in node.children() {
        // nested cards carry their own signals
        if !roots.contains(&child.id()) {
            visit(child, depth + 1, card, roots, rules);
        }
    }
}

/// Card containers in document order.
///
/// Every element carrying a root class is a card. A card nested inside
/// another (typically because markup upstream was never closed) is still its
/// own card, and its subtree does not contribute signals to the outer one.
pub fn parse_doc_cards(html: &str, rules: &Rules) -> Vec<DocCard> {
    if html.trim().is_empty() {
        return Vec::new();
    }
    let doc = Html::parse_document(html);
    let root_classes: HashSet<&str> = rules.cards.root_classes.iter().map(String::as_str).collect();
    let roots: Vec<NodeRef<'_, Node>> = doc
        .root_element()
        .descendants()
        .filter(|n| {
            ElementRef::wrap(*n).is_some_and(|el| el.value().classes().any(|c| root_classes.contains(c)))
        })
        .collect();
    let ids: HashSet<NodeId> = roots.iter().map(|n| n.id()).collect();

    roots
        .into_iter()
        .enumerate()
        .map(|(doc_index, root)| {
            let mut card = DocCard { doc_index, ..DocCard::default() };
            visit(root, 0, &mut card, &ids, rules);
            card
        })
        .collect()
}

fn matches_class(card: &DocCard, table: &[crate::rules::SignalRule]) -> Option<Etype> {
    table.iter().find(|r| card.class_tokens.contains(&r.signal)).map(|r| r.etype)
}

/// Labels one card with the first tier that fires.
pub fn classify_card(card: &DocCard, rules: &Rules) -> EtypeLabel {
    let t = &rules.tiers;
    let label = |etype, tier| EtypeLabel { etype, tier, doc_index: card.doc_index };

    if !card.heading_text.is_empty() {
        if let Some(e) = rules.heading_etype(&card.heading_text) {
            return label(e, 1);
        }
    }
    if let Some(e) = matches_class(card, &t.ad_class) {
        return label(e, 2);
    }
    if let Some(e) = matches_class(card, &t.knowledge_class) {
        return label(e, 3);
    }
    if !card.data_attrid.is_empty() {
        if let Some(r) = t.attrid_prefix.iter().find(|r| card.data_attrid.starts_with(&r.signal)) {
            return label(r.etype, 4);
        }
    }
    if card.has_h3 && card.has_cite {
        return label(t.organic, 5);
    }
    if !card.heading_text.is_empty() {
        return label(t.heading_fallback, 6);
    }
    if let Some(e) = matches_class(card, &t.chrome_class) {
        return label(e, 7);
    }
    label(t.default, 8)
}

/// Labels every card, then sweeps the trailing run of footer-signature
/// cards into `chrome`. Order is preserved.
pub fn label_sequence(cards: &[DocCard], rules: &Rules) -> Vec<EtypeLabel> {
    let mut labels: Vec<EtypeLabel> = cards.iter().map(|c| classify_card(c, rules)).collect();
    for (card, label) in cards.iter().zip(labels.iter_mut()).rev() {
        if !card.class_tokens.iter().any(|c| rules.is_chrome_token(c)) {
            break;
        }
        label.etype = Etype::Chrome;
        label.tier = 7;
    }
    labels
}

/// Count of labels per tier, index 0 = tier 1.
pub fn tier_histogram(labels: &[EtypeLabel]) -> [usize; 8] {
    let mut h = [0; 8];
    for l in labels {
        h[(l.tier as usize).clamp(1, 8) - 1] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> Rules {
        Rules::default()
    }

    const FIVE_CARDS: &str = r##"<html><body><div id="rso">
        <div class="uEierd ads-top"><span>Sponsored</span><a href="#">ad</a><cite>ad.example</cite></div>
        <div class="g"><a href="#"><h3>First</h3></a><cite>one.example</cite><div class="VwiC3b">alpha beta</div></div>
        <div class="ULSxyf"><div role="heading">People also ask</div><div>q1</div><div>q2</div></div>
        <div class="g"><a href="#"><h3>Second</h3></a><cite>two.example</cite><div class="VwiC3b">gamma</div></div>
        <div class="footer-links"><a href="#">Help</a><a href="#">Privacy</a></div>
    </div></body></html>"##;

    #[test]
    fn cards_in_document_order() {
        let cards = parse_doc_cards(FIVE_CARDS, &rules());
        assert_eq!(cards.len(), 5);
        assert_eq!(cards.iter().map(|c| c.doc_index).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert!(cards[1].has_h3 && cards[1].has_cite);
        assert_eq!(cards[1].snippet_text, "alpha beta");
        assert_eq!(cards[2].heading_text, "People also ask");
        assert_eq!(cards[4].anchor_count, 2);
    }

    #[test]
    fn empty_document_has_no_cards() {
        assert!(parse_doc_cards("", &rules()).is_empty());
    }

    #[test]
    fn unclosed_div_inside_card_keeps_count() {
        let r = rules();
        let well = r#"<div class="g"><h3>a</h3><cite>x</cite><div>inner</div></div><div class="g"><h3>b</h3><cite>y</cite></div>"#;
        let broken = r#"<div class="g"><h3>a</h3><cite>x</cite><div>inner</div><div class="g"><h3>b</h3><cite>y</cite></div>"#;
        let a = parse_doc_cards(well, &r);
        let b = parse_doc_cards(broken, &r);
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), a.len());
        // nested second card does not leak its signals into the first
        assert_eq!(b[0].anchor_count, 0);
        assert_eq!(label_sequence(&a, &r), label_sequence(&b, &r));
    }

    #[test]
    fn tier_examples() {
        let r = rules();
        let paa = DocCard { heading_text: "People also ask".into(), ..Default::default() };
        assert_eq!(classify_card(&paa, &r), EtypeLabel { etype: Etype::Paa, tier: 1, doc_index: 0 });

        let organic = DocCard { has_h3: true, has_cite: true, doc_index: 3, ..Default::default() };
        assert_eq!(classify_card(&organic, &r), EtypeLabel { etype: Etype::Organic, tier: 5, doc_index: 3 });

        let empty = DocCard::default();
        assert_eq!(classify_card(&empty, &r).etype, Etype::UnknownWidget);
        assert_eq!(classify_card(&empty, &r).tier, 8);
    }

    #[test]
    fn every_tier_reachable() {
        let r = rules();
        let tok = |t: &str| [t.to_string()].into_iter().collect::<BTreeSet<_>>();
        let cases = [
            (DocCard { heading_text: "Top stories".into(), ..Default::default() }, Etype::TopStories, 1),
            (DocCard { class_tokens: tok("rhs-ad"), ..Default::default() }, Etype::DdRight, 2),
            (DocCard { class_tokens: tok("kp-wholepage"), ..Default::default() }, Etype::KnowledgePanel, 3),
            (DocCard { data_attrid: "kc:/people/person".into(), ..Default::default() }, Etype::KnowledgePanel, 4),
            (DocCard { has_h3: true, has_cite: true, ..Default::default() }, Etype::Organic, 5),
            (DocCard { heading_text: "Videos".into(), ..Default::default() }, Etype::OtherWidget, 6),
            (DocCard { class_tokens: tok("fbar"), ..Default::default() }, Etype::Chrome, 7),
            (DocCard::default(), Etype::UnknownWidget, 8),
        ];
        for (card, etype, tier) in cases {
            let l = classify_card(&card, &r);
            assert_eq!((l.etype, l.tier), (etype, tier), "{card:?}");
        }
    }

    #[test]
    fn earlier_tier_wins_on_multi_match() {
        let r = rules();
        // heading + ad class + organic structure: tier 1
        let card = DocCard {
            heading_text: "Images".into(),
            class_tokens: ["ads-top".to_string()].into_iter().collect(),
            has_h3: true,
            has_cite: true,
            ..Default::default()
        };
        assert_eq!(classify_card(&card, &r).tier, 1);
        // ad class + organic structure: tier 2
        let card = DocCard { heading_text: String::new(), ..card };
        assert_eq!(classify_card(&card, &r), EtypeLabel { etype: Etype::DdTop, tier: 2, doc_index: 0 });
    }

    #[test]
    fn trailing_footer_swept_to_chrome() {
        let r = rules();
        let organic = |i| DocCard { doc_index: i, has_h3: true, has_cite: true, ..Default::default() };
        // footer card with a heading would otherwise be other_widget at tier 6
        let footer = DocCard {
            doc_index: 2,
            heading_text: "Footer links".into(),
            class_tokens: ["footer-links".to_string()].into_iter().collect(),
            ..Default::default()
        };
        let labels = label_sequence(&[organic(0), organic(1), footer], &r);
        let etypes: Vec<_> = labels.iter().map(|l| l.etype).collect();
        assert_eq!(etypes, vec![Etype::Organic, Etype::Organic, Etype::Chrome]);
        assert_eq!(labels.iter().map(|l| l.doc_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(label_sequence(&[], &r).is_empty());
    }

    #[test]
    fn html_labels_end_to_end() {
        let r = rules();
        let labels = label_sequence(&parse_doc_cards(FIVE_CARDS, &r), &r);
        let etypes: Vec<_> = labels.iter().map(|l| l.etype).collect();
        assert_eq!(
            etypes,
            vec![Etype::DdTop, Etype::Organic, Etype::Paa, Etype::Organic, Etype::Chrome]
        );
        assert_eq!(tier_histogram(&labels), [1, 1, 0, 0, 2, 0, 1, 0]);
    }
}
