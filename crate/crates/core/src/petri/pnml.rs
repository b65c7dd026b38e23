//! Minimal PNML (place/transition net) interchange.
//!
//! Supported elements: `net`, `page`, `place` with `initialMarking`,
//! `transition` with `name` (missing or empty name, or the
//! `activity="$invisible$"` tool marker, means silent) and `arc`. Final
//! markings use the `finalmarkings` element written by common process-mining
//! tools, either directly under `net` or wrapped in a `toolspecific` element.
//! Without one, the final marking puts one token on every place without
//! outgoing arcs.

use std::collections::HashMap;
use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{Arc, PetriError, PetriNet, PlaceId, TransitionId};

const INVISIBLE_MARKER: &str = "$invisible$";

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn text_of(node: Node<'_, '_>) -> Option<String> {
    child(node, "text").map(|t| t.text().unwrap_or_default().trim().to_owned())
}

fn token_count(node: Node<'_, '_>, what: &str) -> Result<u32, PetriError> {
    let raw = text_of(node).unwrap_or_default();
    if raw.is_empty() {
        return Ok(0);
    }
    raw.parse()
        .map_err(|_| PetriError::Pnml(format!("invalid token count `{raw}` in {what}")))
}

fn required_attr<'a>(node: Node<'a, '_>, attr: &str) -> Result<&'a str, PetriError> {
    node.attribute(attr).ok_or_else(|| {
        PetriError::Pnml(format!("<{}> without `{attr}` attribute", node.tag_name().name()))
    })
}

pub fn pnml_read(xml: &str) -> Result<PetriNet, PetriError> {
    let doc = Document::parse(xml)?;
    let net_node = doc
        .descendants()
        .find(|n| n.has_tag_name("net"))
        .ok_or_else(|| PetriError::Pnml("no <net> element".into()))?;

    let mut b = PetriNet::builder();
    let mut places: HashMap<String, PlaceId> = HashMap::new();
    let mut transitions: HashMap<String, TransitionId> = HashMap::new();

    for node in net_node.descendants().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "place" if node.parent().is_some_and(|p| !p.has_tag_name("marking")) => {
                let id = required_attr(node, "id")?.to_owned();
                if places.contains_key(&id) {
                    return Err(PetriError::DuplicatePlace(id));
                }
                let p = b.place(id.clone());
                if let Some(init) = child(node, "initialMarking") {
                    let tokens = token_count(init, "initialMarking")?;
                    if tokens > 0 {
                        b.initial(p, tokens);
                    }
                }
                places.insert(id, p);
            }
            "transition" => {
                let id = required_attr(node, "id")?.to_owned();
                if transitions.contains_key(&id) {
                    return Err(PetriError::DuplicateTransition(id));
                }
                let invisible = node.children().any(|c| {
                    c.has_tag_name("toolspecific") && c.attribute("activity") == Some(INVISIBLE_MARKER)
                });
                let label = child(node, "name")
                    .and_then(text_of)
                    .filter(|l| !l.is_empty() && !invisible);
                let t = b.transition(id.clone(), label.as_deref());
                transitions.insert(id, t);
            }
            _ => {}
        }
    }

    let mut has_output = vec![false; places.len()];
    for node in net_node.descendants().filter(|n| n.has_tag_name("arc")) {
        let id = node.attribute("id").unwrap_or("").to_owned();
        let source = required_attr(node, "source")?;
        let target = required_attr(node, "target")?;
        if let Some(ins) = child(node, "inscription") {
            let weight = token_count(ins, "arc inscription")?;
            if weight > 1 {
                return Err(PetriError::Pnml(format!("arc `{id}` has weight {weight}; only 1 is supported")));
            }
        }
        let dangling = |node: &str| PetriError::DanglingArc {
            arc: id.clone(),
            node: node.to_owned(),
        };
        match (places.get(source), transitions.get(source)) {
            (Some(&p), _) => {
                let t = *transitions.get(target).ok_or_else(|| {
                    if places.contains_key(target) {
                        PetriError::InvalidArc(id.clone())
                    } else {
                        dangling(target)
                    }
                })?;
                has_output[p.0] = true;
                b.arc_in(p, t);
            }
            (None, Some(&t)) => {
                let p = *places.get(target).ok_or_else(|| {
                    if transitions.contains_key(target) {
                        PetriError::InvalidArc(id.clone())
                    } else {
                        dangling(target)
                    }
                })?;
                b.arc_out(t, p);
            }
            (None, None) => return Err(dangling(source)),
        }
    }

    let finals_node = net_node.descendants().find(|n| n.has_tag_name("finalmarkings"));
    match finals_node {
        Some(finals) => {
            for marking in finals.children().filter(|c| c.has_tag_name("marking")) {
                let mut tokens = Vec::new();
                for place in marking.children().filter(|c| c.has_tag_name("place")) {
                    let idref = required_attr(place, "idref")?;
                    let p = *places
                        .get(idref)
                        .ok_or_else(|| PetriError::UnknownPlace(idref.to_owned()))?;
                    let n = token_count(place, "final marking")?;
                    if n > 0 {
                        tokens.push((p, n));
                    }
                }
                b.final_marking(tokens);
            }
        }
        None => {
            let sinks: Vec<(PlaceId, u32)> = places
                .values()
                .filter(|p| !has_output[p.0])
                .map(|&p| (p, 1))
                .collect();
            if !sinks.is_empty() {
                b.final_marking(sinks);
            }
        }
    }
    b.build()
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn pnml_write(net: &PetriNet) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<pnml>\n");
    out.push_str("  <net id=\"net\" type=\"http://www.pnml.org/version-2009/grammar/pnmlcoremodel\">\n");
    out.push_str("    <page id=\"page0\">\n");
    for (i, place) in net.places().iter().enumerate() {
        let id = xml_escape(&place.name);
        let _ = writeln!(out, "      <place id=\"{id}\">");
        let _ = writeln!(out, "        <name><text>{id}</text></name>");
        let tokens = net.initial_marking().get(PlaceId(i));
        if tokens > 0 {
            let _ = writeln!(out, "        <initialMarking><text>{tokens}</text></initialMarking>");
        }
        out.push_str("      </place>\n");
    }
    for t in net.transitions() {
        let _ = writeln!(out, "      <transition id=\"{}\">", xml_escape(&t.name));
        match &t.label {
            Some(label) => {
                let _ = writeln!(out, "        <name><text>{}</text></name>", xml_escape(label));
            }
            None => {
                out.push_str("        <name><text></text></name>\n");
                let _ = writeln!(
                    out,
                    "        <toolspecific tool=\"ProM\" version=\"6.4\" activity=\"{INVISIBLE_MARKER}\"/>"
                );
            }
        }
        out.push_str("      </transition>\n");
    }
    for (i, arc) in net.arcs().enumerate() {
        let (source, target) = match arc {
            Arc::PlaceToTransition(p, t) => (&net.place(p).name, &net.transition(t).name),
            Arc::TransitionToPlace(t, p) => (&net.transition(t).name, &net.place(p).name),
        };
        let _ = writeln!(
            out,
            "      <arc id=\"a{i}\" source=\"{}\" target=\"{}\"/>",
            xml_escape(source),
            xml_escape(target)
        );
    }
    out.push_str("    </page>\n    <finalmarkings>\n");
    for marking in net.final_markings() {
        out.push_str("      <marking>\n");
        for (p, n) in marking.support() {
            let _ = writeln!(
                out,
                "        <place idref=\"{}\"><text>{n}</text></place>",
                xml_escape(&net.place(p).name)
            );
        }
        out.push_str("      </marking>\n");
    }
    out.push_str("    </finalmarkings>\n  </net>\n</pnml>\n");
    out
}
