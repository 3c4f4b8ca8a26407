use hymas_core::prompting::{
    parse_eva_verdict, parse_pevr_verdict, parse_plan, parse_tool_call, ParseError,
};
use hymas_core::{Handoff, Verdict};
use proptest::prelude::*;

const TOOLS: [&str; 3] = ["search", "lookup", "finish"];

/// Block content as a parser returns it: non-empty, trimmed, free of tag
/// delimiters.
fn body() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 .,:;\n\\-]{1,80}"
        .prop_map(|s| s.trim().to_string())
        .prop_filter("non-empty after trim", |s| !s.is_empty())
}

/// Free text that never contains a verdict keyword, tag, or bracket.
fn chatter() -> impl Strategy<Value = String> {
    "[a-z ,.\n]{0,60}"
}

fn arg() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 _.,'\\-]{0,40}"
}

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(10_000)
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn plan_round_trip(pre in chatter(), plan in body(), post in chatter()) {
        let text = format!("{pre}<PLAN>\n{plan}\n</PLAN>{post}");
        prop_assert_eq!(parse_plan(&text).unwrap().text, plan.clone());
        // A plan is never a verdict.
        prop_assert!(parse_pevr_verdict(&text).is_err());
        prop_assert!(parse_eva_verdict(&text).is_err());
    }

    #[test]
    fn pevr_verdict_round_trip(replan in body(), ws in "[ \n]{0,3}", tail in chatter()) {
        let text = format!("{ws}INTERVENE\n<REPLAN>\n{replan}\n</REPLAN>{tail}");
        let d = parse_pevr_verdict(&text).unwrap();
        prop_assert_eq!(d.verdict, Verdict::Intervene);
        match d.payload {
            Some(Handoff::Replan { replan: p, .. }) => prop_assert_eq!(p.text, replan),
            other => prop_assert!(false, "payload {:?}", other),
        }
        // No SUMMARY/ADVICE, so not an advice verdict; no PLAN block either.
        prop_assert!(matches!(parse_eva_verdict(&text), Err(ParseError::MalformedVerdict(_))));
        prop_assert!(parse_plan(&text).is_err());
    }

    #[test]
    fn eva_verdict_round_trip(summary in body(), advice in body(), tail in chatter()) {
        let text = format!("INTERVENE\n<SUMMARY>\n{summary}\n</SUMMARY>\n<ADVICE>\n{advice}\n</ADVICE>{tail}");
        let d = parse_eva_verdict(&text).unwrap();
        match d.payload {
            Some(Handoff::Advice { summary: s, advice: a }) => {
                prop_assert_eq!(s, summary);
                prop_assert_eq!(a, advice);
            }
            other => prop_assert!(false, "payload {:?}", other),
        }
        prop_assert!(matches!(parse_pevr_verdict(&text), Err(ParseError::MalformedVerdict(_))));
        prop_assert!(parse_plan(&text).is_err());
    }

    #[test]
    fn continue_is_accepted_by_both(tail in chatter()) {
        let text = format!("CONTINUE{}", if tail.is_empty() { String::new() } else { format!(" {tail}") });
        let a = parse_pevr_verdict(&text).unwrap();
        let b = parse_eva_verdict(&text).unwrap();
        prop_assert_eq!(a.verdict, Verdict::Continue);
        prop_assert_eq!(b.verdict, Verdict::Continue);
        prop_assert!(a.payload.is_none() && b.payload.is_none());
    }

    #[test]
    fn verdict_needs_leading_keyword(pre in "[a-z]{1,10}", body in chatter()) {
        for kw in ["CONTINUE", "INTERVENE"] {
            let text = format!("{pre} {kw} {body}");
            prop_assert!(parse_pevr_verdict(&text).is_err());
            prop_assert!(parse_eva_verdict(&text).is_err());
            // Glued suffix is not the keyword.
            let glued = format!("{kw}{pre}");
            prop_assert!(parse_pevr_verdict(&glued).is_err());
        }
    }

    #[test]
    fn tool_call_round_trip(reason in chatter(), tool in prop::sample::select(TOOLS.to_vec()), a in arg()) {
        let text = format!("{reason}\nTool call: {tool}[{a}]");
        let parsed = parse_tool_call(&text, &TOOLS).unwrap();
        prop_assert_eq!(parsed.call.tool.as_str(), tool);
        prop_assert_eq!(&parsed.call.argument, &a);
        prop_assert_eq!(parsed.reasoning, reason.trim().to_string());
        // Display form re-parses to the same call.
        let again = parse_tool_call(&parsed.call.to_string(), &TOOLS).unwrap();
        prop_assert_eq!(again.call, parsed.call);
    }

    #[test]
    fn last_call_wins(a in arg(), b in arg()) {
        let text = format!("search[{a}] then lookup[{b}]");
        let parsed = parse_tool_call(&text, &TOOLS).unwrap();
        prop_assert_eq!(parsed.call.tool.as_str(), "lookup");
        prop_assert_eq!(parsed.call.argument, b);
    }

    #[test]
    fn unknown_tools_rejected(name in "[a-z]{1,8}", a in arg(), reason in chatter()) {
        prop_assume!(!TOOLS.iter().any(|t| name.ends_with(t)));
        let text = format!("{reason} {name}[{a}]");
        prop_assert_eq!(parse_tool_call(&text, &TOOLS), Err(ParseError::NoToolCall));
        // Tool names glued to a longer word are not calls.
        let glued = format!("x{}[{a}]", TOOLS[0]);
        prop_assert_eq!(parse_tool_call(&glued, &TOOLS), Err(ParseError::NoToolCall));
    }

    #[test]
    fn plans_and_verdicts_are_not_tool_calls(plan in body()) {
        let text = format!("<PLAN>{plan}</PLAN>");
        prop_assert!(parse_tool_call(&text, &TOOLS).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn whitespace_count_matches_split(text in "[a-z \t\n\r\u{0B}\u{0C}\u{a0}\u{2003}é]{0,60}") {
        let expected = text.split_whitespace().count() as u64;
        prop_assert_eq!(hymas_core::context::whitespace_tokens(&text), expected);
    }
}
