//! Replays the exchanges in docs/API.md against a live server. Set
//! `MATPUB_BLESS=1` to rewrite the response blocks instead of comparing.

mod common;

use std::sync::Arc;

use common::{eval_hotel, repo_path};
use matpub::heuristics::PublishOptions;
use matpub::resolver;

const PUBLIC_URL: &str = "http://127.0.0.1:8080";

struct Exchange {
    method: String,
    target: String,
    body: String,
    /// Byte range of the response block's contents in the document.
    response: std::ops::Range<usize>,
}

/// Pairs each ```http block with the ```text block that follows it.
fn exchanges(doc: &str) -> Vec<Exchange> {
    let mut out = Vec::new();
    let mut rest = 0;
    while let Some(start) = doc[rest..].find("```http\n") {
        let req_start = rest + start + "```http\n".len();
        let req_end = req_start + doc[req_start..].find("```").expect("closed request block");
        let resp_open = req_end + doc[req_end + 3..].find("```text\n").expect("response block follows") + 3;
        let resp_start = resp_open + "```text\n".len();
        let resp_end = resp_start + doc[resp_start..].find("```").expect("closed response block");
        let request = &doc[req_start..req_end];
        let (head, body) = request.split_once("\n\n").unwrap_or((request.trim_end(), ""));
        let (method, target) = head.split_once(' ').expect("METHOD TARGET");
        out.push(Exchange {
            method: method.to_string(),
            target: target.to_string(),
            body: body.trim_end().to_string(),
            response: resp_start..resp_end,
        });
        rest = resp_end + 3;
    }
    out
}

#[tokio::test]
async fn documented_exchanges_are_exact() {
    let path = repo_path("docs/API.md");
    let doc = std::fs::read_to_string(&path).unwrap();
    let exchanges = exchanges(&doc);
    assert_eq!(exchanges.len(), 8);

    let catalog = eval_hotel(365).with_availability_rate(1.0).unwrap();
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let server = resolver::spawn(listener, Arc::new(catalog), PublishOptions::default(), Some(PUBLIC_URL))
        .await
        .unwrap();
    let client = reqwest::Client::new();

    let mut actual = Vec::new();
    for ex in &exchanges {
        let url = format!("{}{}", server.url(), ex.target);
        let request = match ex.method.as_str() {
            "GET" => client.get(url),
            "POST" => client.post(url).body(ex.body.clone()),
            other => panic!("unsupported method {other}"),
        };
        let r = request.send().await.unwrap();
        let status = r.status();
        let epoch = r.headers()["x-inventory-epoch"].to_str().unwrap().to_string();
        let body = r.text().await.unwrap();
        actual.push(format!(
            "HTTP/1.1 {} {}\nx-inventory-epoch: {epoch}\n\n{body}\n",
            status.as_u16(),
            status.canonical_reason().unwrap_or("")
        ));
    }
    server.shutdown().await.unwrap();

    if std::env::var_os("MATPUB_BLESS").is_some() {
        let mut blessed = doc.clone();
        for (ex, text) in exchanges.iter().zip(&actual).rev() {
            blessed.replace_range(ex.response.clone(), text);
        }
        std::fs::write(&path, blessed).unwrap();
        return;
    }
    for (ex, text) in exchanges.iter().zip(&actual) {
        assert_eq!(&doc[ex.response.clone()], text, "{} {}", ex.method, ex.target);
    }
}
