#!/usr/bin/env python3
"""Writes the toy filings as MinerU-style content_list.json files.

Three synthetic filings. Section titles carry vocabulary that the body text
avoids (so only the metadata path sees it), and a few rare identifiers occur
in exactly one chunk (so the lexical path is decisive for them).
"""
import json
from pathlib import Path

HERE = Path(__file__).resolve().parent


def h(text, page):
    return {"type": "text", "text": text, "text_level": 1, "page_idx": page}


def p(text, page):
    return {"type": "text", "text": text, "page_idx": page}


BOILERPLATE = (
    "This report contains forward-looking statements that involve risks and uncertainties. "
    "Actual results may differ materially from those projected."
)

NORTHWIND_2024 = [
    h("Business Overview", 0),
    p("Northwind Instruments designs precision sensors for industrial automation customers. "
      "The company sells through direct teams in North America and distributors in Europe.", 0),
    p("Headcount reached 4,210 employees at year end. "
      "Engineering staff account for roughly forty percent of the workforce.", 0),
    h("Revenue and Gross Margin", 1),
    p("Net sales for fiscal 2024 were $1.84 billion, up 12 percent from the prior year. "
      "Growth came mainly from the optical encoder product family.", 1),
    {"type": "table", "img_path": "images/nw24_sales_by_region.jpg",
     "table_caption": ["Net sales by region"], "table_body": "<table></table>", "page_idx": 1},
    p("Gross margin expanded to 47.5 percent because component costs fell and factory utilization improved. "
      "Pricing actions added about one point.", 1),
    h("Liquidity and Capital Resources", 2),
    p("Cash and equivalents totaled $612 million at December 31, 2024. "
      "The revolving credit facility of $500 million remained undrawn.", 2),
    p("Operating cash flow was $305 million. "
      "Capital expenditures of $88 million funded a new cleanroom in Dresden.", 2),
    p("The board authorized a $200 million share repurchase program under plan NWX-7B. "
      "No shares had been bought back by year end.", 2),
    h("Risk Factors", 3),
    p("Northwind depends on a single foundry for its mixed-signal chips. "
      "A disruption at that supplier could delay shipments for several quarters.", 3),
    p("Export controls may restrict sales to certain customers in Asia. "
      "These rules changed twice during the year.", 3),
    h("Legal Proceedings", 4),
    p("A former distributor filed a breach of contract claim in Delaware seeking $14 million. "
      "Management believes the claim lacks merit.", 4),
    h("Research and Development", 6),
    p("Research spending rose to $192 million, or 10.4 percent of net sales. "
      "Most of the increase funded the lidar calibration program.", 6),
    p("The team filed 37 patent applications during the year. "
      "A second design center opened in Pune to support firmware work.", 6),
    h("Segment Information", 7),
    p("The Motion segment, which includes encoders and resolvers, generated $1.12 billion of sales. "
      "Segment operating income was $268 million.", 7),
    p("The Environmental segment sells gas and particulate monitors. "
      "Its sales declined 3 percent after a large utility order did not repeat.", 7),
    h("Customer Concentration", 8),
    p("The ten largest customers represented 38 percent of net sales. "
      "One robotics maker alone accounted for 11 percent.", 8),
    p("Contracts with that robotics maker renew annually each October. "
      "Pricing is reset against a published copper index.", 8),
    h("Income Taxes", 9),
    p("The effective tax rate was 19.8 percent, down from 22.5 percent. "
      "A research credit settlement in Germany lowered the rate by two points.", 9),
    h("Cautionary Note", 10),
    p(BOILERPLATE, 10),
]

NORTHWIND_2023 = [
    h("Business Overview", 0),
    p("Northwind Instruments designs precision sensors for factory automation. "
      "Its customers include robot makers and packaging line builders.", 0),
    h("Revenue and Gross Margin", 1),
    p("Net sales for fiscal 2023 were $1.64 billion, an increase of 6 percent. "
      "Demand for legacy proximity sensors softened in the second half.", 1),
    p("Gross margin was 44.1 percent. "
      "Freight surcharges and expedited purchases of scarce parts weighed on profitability.", 1),
    h("Liquidity and Capital Resources", 2),
    p("Cash and equivalents were $540 million at December 31, 2023. "
      "The company amended its revolving credit facility to extend maturity to 2028.", 2),
    p("Capital expenditures were $61 million, mostly for test equipment. "
      "No dividends were declared.", 2),
    h("Risk Factors", 3),
    p("Component shortages persisted through the first half of 2023. "
      "Lead times for microcontrollers exceeded fifty weeks at the peak.", 3),
    h("Legal Proceedings", 5),
    p("A patent suit filed by Quadrant Optics in Texas was dismissed in September 2023. "
      "Quadrant did not appeal the ruling.", 5),
    h("Employees", 6),
    p("Headcount was 3,950 at year end. "
      "Voluntary turnover fell to 8 percent from 11 percent.", 6),
    h("Research and Development", 7),
    p("Research spending was $171 million. "
      "The first lidar calibration prototypes shipped to two pilot customers.", 7),
    h("Income Taxes", 8),
    p("The effective tax rate was 22.5 percent. "
      "Valuation allowances on Brazilian losses added 0.7 points.", 8),
    h("Cautionary Note", 9),
    p(BOILERPLATE, 9),
]

BOREALIS_2024 = [
    h("Segment Results", 0),
    p("Borealis Energy reported second quarter revenue of $932 million. "
      "The wind segment contributed $410 million and the hydro segment $287 million.", 0),
    p("Adjusted EBITDA for the quarter was $356 million. "
      "Lower wind speeds in the North Sea reduced generation by 7 percent.", 0),
    {"type": "image", "img_path": "images/bor_q2_generation.jpg",
     "img_caption": ["Quarterly generation by technology"], "page_idx": 0},
    h("Debt Refinancing", 1),
    p("In May the company issued $750 million of green bonds due 2034 at a coupon of 4.9 percent. "
      "Proceeds repaid a term loan maturing in 2025.", 1),
    p("Net debt to adjusted EBITDA stood at 3.8 times. "
      "Rating agencies affirmed the investment grade rating.", 1),
    h("Commodity Hedging", 2),
    p("About 80 percent of expected 2025 output is sold forward under fixed price contracts. "
      "Power purchase agreements with utilities cover the remainder through 2030.", 2),
    p("Unrealized losses on electricity swaps were $42 million. "
      "These losses reverse as contracts settle.", 2),
    h("Outlook", 3),
    p("Management reaffirmed full year adjusted EBITDA guidance of $1.35 billion to $1.45 billion. "
      "Two offshore projects remain on schedule for commissioning in 2026.", 3),
    p("The Skagerrak array, identifier BRL-SK2, will add 620 megawatts of capacity. "
      "Turbine installation starts next spring.", 3),
    h("Plant Operations", 5),
    p("Fleet availability averaged 96.2 percent across onshore sites. "
      "Two gearbox failures at the Lapland farm caused most of the downtime.", 5),
    p("The hydro fleet benefited from heavy spring snowmelt in Norway. "
      "Reservoir levels ended June 9 points above the ten-year average.", 5),
    h("Sustainability Metrics", 6),
    p("Carbon intensity fell to 18 grams per kilowatt hour. "
      "The remaining gas peaker in Aberdeen will close in 2027.", 6),
    p("Lost time injury frequency was 0.9 per million hours worked. "
      "Contractor incidents made up most of the recorded cases.", 6),
    h("Capital Allocation", 7),
    p("The quarterly dividend was raised to 31 cents per share. "
      "The payout ratio target remains 60 to 70 percent of free cash flow.", 7),
    p("Growth capital of $1.1 billion is committed for 2024. "
      "Half of it funds the Skagerrak array and the rest goes to solar repowering.", 7),
    h("Market Conditions", 8),
    p("Nordic system prices averaged 38 euros per megawatt hour, down 40 percent. "
      "Warm weather and full reservoirs depressed wholesale power.", 8),
    p("Capture prices for wind output were 14 percent below the system average. "
      "Negative price hours doubled compared with last year.", 8),
    h("Cautionary Note", 9),
    p(BOILERPLATE, 9),
]

DOCUMENTS = {
    "northwind_2024_10k": NORTHWIND_2024,
    "northwind_2023_10k": NORTHWIND_2023,
    "borealis_2024_q2": BOREALIS_2024,
}


def main():
    out = HERE / "filings"
    out.mkdir(exist_ok=True)
    for doc_id, blocks in DOCUMENTS.items():
        path = out / f"{doc_id}_content_list.json"
        path.write_text(json.dumps(blocks, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
